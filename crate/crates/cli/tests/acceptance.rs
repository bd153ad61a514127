//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero when any criterion fails.

use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kometo::exec::Execution;
use kometo::fidelity::{
    CostScale, CostToBiasModel, Distortion, Environment, FidelitySchedule, MultiFidelityFunction,
};
use kometo::harness::{read_csv, CSV_HEADER};
use kometo::instances::{
    benchmark, halton_points, make_depth_limited_instance, make_width_limited_family,
    random_tree_instance, single_branch_instance, verify_membership, BenchmarkName, BranchRule,
    Check, SmoothnessProfile, TreeInstance, TruncatedTree,
};
use kometo::kometo::{run, KometoConfig, KometoRun};
use kometo::partition::Partition;
use kometo::theory::{
    corollary4_rate, lambert_w, lambert_w_lower, lemma7_bound, lemma7_conditions, lemma7_max_depth,
    theorem1_lower, theorem3_bound, Regime,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn profile(d: f64) -> SmoothnessProfile {
    SmoothnessProfile::with_min_constant(1.0, 0.5, d, 2).unwrap()
}

fn env_for(
    f: Arc<dyn MultiFidelityFunction>,
    model: CostToBiasModel,
    scale: CostScale,
    budget: f64,
) -> Environment {
    Environment::new(f, FidelitySchedule::new(model, scale).unwrap(), budget).unwrap()
}

fn run_tree(inst: &TreeInstance, budget: f64, cfg: KometoConfig) -> KometoRun {
    let mut env = env_for(
        Arc::new(inst.clone()),
        *inst.model(),
        CostScale::Unbounded,
        budget,
    );
    run(cfg, &mut env).unwrap()
}

/// Models chosen so that both budget regimes occur between 10² and 10⁶.
fn conformance_models() -> [CostToBiasModel; 3] {
    [
        CostToBiasModel::PolyDecay {
            a: 0.05,
            alpha: 1.0,
        },
        CostToBiasModel::ExpDecay {
            b: 1.0,
            sigma: 1.0,
            beta: 0.5,
        },
        CostToBiasModel::Cutoff { a: 5.0 },
    ]
}

fn conformance_instances() -> Vec<TreeInstance> {
    let mut out = Vec::new();
    for model in conformance_models() {
        for d in [0.0, 0.5, 1.0] {
            for seed in 0..6 {
                out.push(random_tree_instance(profile(d), model, 8, seed).unwrap());
            }
        }
    }
    out
}

const CONFORMANCE_BUDGETS: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

fn budget_safety() -> Outcome {
    let start = Instant::now();
    let trials = 1200;
    let violations: Vec<String> = Execution::Parallel
        .map_range(trials, |i| {
            let mut rng = ChaCha8Rng::seed_from_u64(i as u64);
            let budget = 10f64.powf(rng.gen_range(1.0..=6.0));
            let cfg = KometoConfig {
                arity: rng.gen_range(2..=3),
                budget_optimization: rng.gen(),
                lazy_child_evaluation: rng.gen(),
                parent_reuse: rng.gen(),
            };
            let mut env = if i % 4 == 3 {
                let name = BenchmarkName::ALL[rng.gen_range(0..5)];
                let model = CostToBiasModel::PolyDecay { a: 1.0, alpha: 1.0 };
                env_for(
                    Arc::new(benchmark(name).clone()),
                    model,
                    CostScale::Capped { top_cost: 50.0 },
                    budget,
                )
            } else {
                let model = conformance_models()[i % 3];
                let d = [0.0, 0.5, 1.0][rng.gen_range(0..3)];
                let inst = random_tree_instance(profile(d), model, 6, i as u64).unwrap();
                env_for(Arc::new(inst), model, CostScale::Unbounded, budget)
            };
            let out = run(cfg, &mut env).unwrap();
            (out.trace.spent > budget || !env.ledger().audit())
                .then(|| format!("trial {i}: spent {} of {budget}", out.trace.spent))
        })
        .into_iter()
        .flatten()
        .collect();
    let elapsed = start.elapsed();
    if !violations.is_empty() {
        return Err(format!(
            "{} violations, first: {}",
            violations.len(),
            violations[0]
        ));
    }
    if elapsed > Duration::from_secs(120) {
        return Err(format!("{trials} runs took {elapsed:.1?}"));
    }
    Ok(format!("{trials} runs, zero violations, {elapsed:.1?}"))
}

fn upper_bound_conformance() -> Outcome {
    let instances = conformance_instances();
    let results = Execution::Parallel.map(instances, |inst| {
        let mut seen = Vec::new();
        for budget in CONFORMANCE_BUDGETS {
            let out = run_tree(&inst, budget, KometoConfig::default());
            let bound =
                theorem3_bound(inst.profile(), inst.model(), out.lambda_tilde as f64).unwrap();
            if out.trace.regret > bound.regret_bound {
                return Err(format!(
                    "{} at {budget}: regret {} > bound {}",
                    inst.name(),
                    out.trace.regret,
                    bound.regret_bound
                ));
            }
            seen.push((*inst.model(), bound.regime));
        }
        Ok(seen)
    });
    let count = results.len();
    let mut regimes = Vec::new();
    for r in results {
        regimes.extend(r?);
    }
    for model in conformance_models() {
        for regime in [Regime::High, Regime::Low] {
            if !regimes.contains(&(model, regime)) {
                return Err(format!("{model} never reached the {regime:?} regime"));
            }
        }
    }
    Ok(format!(
        "{count} instances x {} budgets, both regimes per model",
        CONFORMANCE_BUDGETS.len()
    ))
}

fn per_level_conformance() -> Outcome {
    let instances = conformance_instances();
    let checked = Execution::Parallel.map(instances, |inst| {
        let (p, m) = (*inst.profile(), *inst.model());
        let mut pairs = 0usize;
        for budget in CONFORMANCE_BUDGETS {
            let out = run_tree(&inst, budget, KometoConfig::default());
            let lt = out.lambda_tilde as f64;
            let Some(j_max) = out.max_level else { continue };
            for j in 0..=j_max {
                let mut depths: Vec<f64> = (0..64)
                    .map(f64::from)
                    .filter(|&h| lemma7_conditions(&p, &m, lt, j, h))
                    .collect();
                depths.extend(lemma7_max_depth(&p, &m, lt, j));
                for h in depths {
                    pairs += 1;
                    let bound = lemma7_bound(&p, &m, lt, h);
                    if out.trace.regret > bound {
                        return Err(format!(
                            "{} at {budget}, j={j}, h={h}: regret {} > {bound}",
                            inst.name(),
                            out.trace.regret
                        ));
                    }
                }
            }
        }
        Ok(pairs)
    });
    let mut total = 0;
    for c in checked {
        total += c?;
    }
    if total == 0 {
        return Err("no feasible (j, h) pair was found".into());
    }
    Ok(format!("{total} feasible (j, h) pairs"))
}

fn rank_invariance() -> Outcome {
    let distortions: Vec<Distortion> = Distortion::ALL
        .into_iter()
        .filter(|&g| g != Distortion::Identity)
        .collect();
    let instances: Vec<TreeInstance> = (0..20u64)
        .map(|s| {
            let model = conformance_models()[s as usize % 3];
            random_tree_instance(profile([0.0, 0.5, 1.0][s as usize % 3]), model, 7, 100 + s)
                .unwrap()
        })
        .collect();
    let outcomes = Execution::Parallel.map(instances, |inst| {
        let plain = run_tree(&inst, 5e4, KometoConfig::default());
        for &g in &distortions {
            let mut env = env_for(
                Arc::new(inst.clone()),
                *inst.model(),
                CostScale::Unbounded,
                5e4,
            )
            .with_distortion(g);
            let out = run(KometoConfig::default(), &mut env).unwrap();
            let same_output = out.trace.output.iter().map(|v| v.to_bits()).eq(plain
                .trace
                .output
                .iter()
                .map(|v| v.to_bits()));
            if out.openings != plain.openings || !same_output {
                return Err(format!("{} diverges under {g:?}", inst.name()));
            }
        }
        Ok(())
    });
    for o in outcomes {
        o?;
    }
    Ok(format!(
        "20 instances x {} distortions identical",
        distortions.len()
    ))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn rate_check() -> Outcome {
    let alpha = 1.0;
    let model = CostToBiasModel::PolyDecay { a: 1.0, alpha };
    let p = profile(0.0);
    let budgets: Vec<f64> = (0..=24)
        .map(|i| 10f64.powf(3.0 + f64::from(i) / 8.0))
        .collect();
    let seeds = 8u64;
    let cfg = KometoConfig {
        budget_optimization: true,
        ..KometoConfig::default()
    };
    let mean_logs = Execution::Parallel.map(budgets.clone(), |budget| {
        let mut acc = 0.0;
        let mut lt = 0;
        for seed in 0..seeds {
            let inst = single_branch_instance(p, model, BranchRule::Seeded(seed), 1).unwrap();
            let out = run_tree(&inst, budget, cfg);
            acc += out.trace.regret.max(f64::MIN_POSITIVE).ln();
            lt = out.lambda_tilde;
        }
        (acc / seeds as f64, lt as f64)
    });
    let xs: Vec<f64> = budgets.iter().map(|b| b.ln()).collect();
    let ys: Vec<f64> = mean_logs.iter().map(|m| m.0).collect();
    let lts: Vec<f64> = mean_logs.iter().map(|m| m.1.ln()).collect();
    let slope = least_squares_slope(&xs, &ys);
    let slope_eff = least_squares_slope(&lts, &ys);
    let detail = format!(
        "slope vs budget {slope:.3}, vs effective budget {slope_eff:.3}, target {:.2} +- 0.25",
        -alpha
    );
    if (slope + alpha).abs() <= 0.25 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn exact_recovery() -> Outcome {
    let model = CostToBiasModel::Cutoff { a: 1.0 };
    let p = profile(0.0);
    let mut checked = 0;
    for budget in [1e3, 1e4, 1e5] {
        let lt = kometo::kometo::effective_budget(budget, 2) as f64;
        let h = theorem3_bound(&p, &model, lt).unwrap().h;
        let target = (h.ceil() - 1.0).max(0.0) as u32;
        let depth = (h.floor() as u32).max(1);
        for rule in [
            BranchRule::Child(0),
            BranchRule::Child(1),
            BranchRule::Seeded(17),
            BranchRule::Seeded(42),
        ] {
            let inst = make_depth_limited_instance(p, model, depth, rule).unwrap();
            let out = run_tree(&inst, budget, KometoConfig::default());
            let cell = inst
                .partition()
                .cell_containing(&out.trace.output, target)
                .unwrap();
            if Some(cell.id) != inst.tree().branch_node(target) {
                return Err(format!(
                    "budget {budget}: output {:?} not in the optimal depth-{target} cell",
                    out.trace.output
                ));
            }
            checked += 1;
        }
    }
    Ok(format!(
        "{checked} runs land in the optimal depth-(ceil(h)-1) cell"
    ))
}

fn sandwich() -> Outcome {
    let models = [
        CostToBiasModel::PolyDecay { a: 1.0, alpha: 1.0 },
        CostToBiasModel::PolyDecay { a: 0.1, alpha: 2.0 },
        CostToBiasModel::ExpDecay {
            b: 1.0,
            sigma: 1.0,
            beta: 0.5,
        },
        CostToBiasModel::ExpDecay {
            b: 2.0,
            sigma: 2.0,
            beta: 1.0,
        },
        CostToBiasModel::Cutoff { a: 1.0 },
        CostToBiasModel::Cutoff { a: 10.0 },
    ];
    let mut points = 0;
    let mut tried = 0;
    for model in models {
        for nu in [1.0, 2.0] {
            for rho in [0.5, 0.7] {
                for d in [0.25, 0.5, 1.0] {
                    let p = SmoothnessProfile::with_min_constant(nu, rho, d, 2).unwrap();
                    for e in 2..=8 {
                        let budget = 10f64.powi(e);
                        tried += 1;
                        let lower = match theorem1_lower(&p, &model, budget) {
                            Ok(l) if l.is_valid(budget) => l.value,
                            _ => continue,
                        };
                        let lt = kometo::kometo::effective_budget(budget, p.k) as f64;
                        if lt < 1.0 {
                            continue;
                        }
                        let upper = theorem3_bound(&p, &model, lt).unwrap().regret_bound;
                        let envelope = corollary4_rate(&p, &model, budget).unwrap().envelope;
                        points += 1;
                        if lower > upper || upper > envelope * (1.0 + 1e-12) {
                            return Err(format!(
                                "{model}, nu={nu}, rho={rho}, d={d}, budget {budget}: \
                                 lower {lower}, upper {upper}, envelope {envelope}"
                            ));
                        }
                    }
                }
            }
        }
    }
    if points < 200 {
        return Err(format!(
            "only {points} of {tried} grid points are in both validity regions"
        ));
    }
    Ok(format!("{points} valid grid points of {tried}"))
}

fn lambert() -> Outcome {
    let mut worst: f64 = 0.0;
    for e in -6..=12 {
        let x = 10f64.powi(e);
        let w = lambert_w(x).map_err(|e| e.to_string())?;
        worst = worst.max((w * w.exp() - x).abs() / x);
    }
    if worst > 1e-12 {
        return Err(format!("worst relative residual {worst:e}"));
    }
    for i in 0..200 {
        let x = std::f64::consts::E * 10f64.powf(f64::from(i) / 10.0);
        let w = lambert_w(x).unwrap();
        let (l1, l2) = (x.ln(), x.ln().ln());
        let lo = l1 - l2 + l2 / (2.0 * l1);
        let hi = l1 - l2 + std::f64::consts::E / (std::f64::consts::E - 1.0) * l2 / l1;
        if !(lo <= w + 1e-12 && w <= hi + 1e-12) || lambert_w_lower(x) > w + 1e-12 {
            return Err(format!("log bounds fail at x = {x}"));
        }
    }
    for i in 0..=100 {
        let x = std::f64::consts::E * f64::from(i) / 100.0;
        if x / std::f64::consts::E > lambert_w(x).unwrap() + 1e-15 {
            return Err(format!("x/e bound fails at x = {x}"));
        }
    }
    Ok(format!("worst residual {worst:.1e}; both bounds hold"))
}

fn verifier() -> Outcome {
    let mut instances = Vec::new();
    for model in conformance_models() {
        for d in [0.0, 0.5, 1.0] {
            let p = profile(d);
            instances.push(single_branch_instance(p, model, BranchRule::Seeded(3), 1).unwrap());
            instances.push(make_depth_limited_instance(p, model, 5, BranchRule::Child(1)).unwrap());
            for seed in 0..4 {
                instances.push(random_tree_instance(p, model, 10, seed).unwrap());
            }
        }
        instances.extend(make_width_limited_family(profile(1.0), model, 6, 2).unwrap());
    }
    let total = instances.len();
    for inst in &instances {
        let report = verify_membership(inst, 20);
        if let Some(c) = report.counterexample {
            return Err(format!("{} rejected: {c:?}", inst.name()));
        }
    }
    let mut levels: Vec<std::collections::BTreeSet<u128>> = (0..=6)
        .map(|_| std::collections::BTreeSet::from([0u128]))
        .collect();
    levels[4].insert(1);
    levels[5].insert(2);
    levels[6].insert(4);
    let max = Partition::new(kometo::partition::Bounds::unit(1), 2)
        .unwrap()
        .max_depth();
    let tree = TruncatedTree::new(2, levels, 0, BranchRule::Child(0), max).unwrap();
    let model = CostToBiasModel::Cutoff { a: 1.0 };
    let bad = TreeInstance::new("corrupted", profile(0.0), model, 1, tree).unwrap();
    match verify_membership(&bad, 20).counterexample {
        Some(c) if c.check == Check::NodeCount && c.depth == 4 => Ok(format!(
            "{total} constructed instances accepted; corruption located at depth {} ({:?})",
            c.depth, c.check
        )),
        other => Err(format!("corrupted instance not located: {other:?}")),
    }
}

fn benchmark_sanity() -> Outcome {
    let oracle = [
        (BenchmarkName::Currin, 13.798722044728327),
        (BenchmarkName::Branin, -0.39788735772973816),
        (BenchmarkName::Hartmann3, 3.862779787332663),
        (BenchmarkName::Hartmann6, 3.322368011415515),
        (BenchmarkName::Borehole, 309.5755876604079),
    ];
    let models = [
        CostToBiasModel::PolyDecay { a: 1.0, alpha: 1.0 },
        CostToBiasModel::ExpDecay {
            b: 5.0,
            sigma: 2.0,
            beta: 0.5,
        },
        CostToBiasModel::Cutoff { a: 20.0 },
    ];
    for (name, expected) in oracle {
        let b = benchmark(name);
        let found = b.target(b.argmax());
        if (found - expected).abs() > 1e-4 || (b.optimum() - expected).abs() > 1e-4 {
            return Err(format!(
                "{name}: optimum {} (attained {found}) vs {expected}",
                b.optimum()
            ));
        }
        let points = halton_points(b.domain(), 10_000);
        for model in models {
            for c in [1.0, 2.0, 7.5, 20.0, 100.0, 1e4] {
                let bias = model.phi(c).map_err(|e| e.to_string())?;
                for x in &points {
                    let gap = (b.approximation(x, 0.0, bias) - b.target(x)).abs();
                    if gap > bias * (1.0 + 1e-12) + 1e-12 {
                        return Err(format!(
                            "{name}: |f - f_z| = {gap} exceeds {bias} at cost {c}"
                        ));
                    }
                }
            }
        }
    }
    Ok("five optima within 1e-4; blends inside the bias envelope on 10^4 points".into())
}

fn desk_run() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_kometo"))
        .args(["bench", "branin", "--algos", "kometo,modified-sqrt,sequool"])
        .args(["--budgets", "10,50,100,200,400", "--out-dir"])
        .arg(dir.path())
        .status()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if !status.success() {
        return Err(format!("bench exited with {status}"));
    }
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:.1?}"));
    }
    let csv = dir.path().join("branin.csv");
    let text = std::fs::read_to_string(&csv).map_err(|e| e.to_string())?;
    if text.lines().next() != Some(CSV_HEADER.join(",").as_str()) {
        return Err("CSV header mismatch".into());
    }
    let rows = read_csv(&csv).map_err(|e| e.to_string())?;
    if rows.len() != 15 || rows.iter().any(|r| r.spent > r.budget) {
        return Err(format!("unexpected rows: {}", rows.len()));
    }
    let svg = std::fs::read_to_string(dir.path().join("branin.svg")).map_err(|e| e.to_string())?;
    if !svg.contains("<polyline") || !svg.contains("floor 1e-10") {
        return Err("SVG lacks curves or the regret floor".into());
    }
    check_svg_floor(&svg)?;
    Ok(format!("15 rows, CSV and SVG in {elapsed:.1?}"))
}

/// Every plotted vertex must lie inside the frame, so no regret falls below
/// the floor.
fn check_svg_floor(svg: &str) -> Result<(), String> {
    for line in svg.lines().filter(|l| l.contains("<polyline")) {
        let pts = line
            .split("points=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .unwrap_or("");
        for pair in pts.split_whitespace() {
            let y: f64 = pair
                .split(',')
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or("bad point")?;
            if !(0.0..=480.0).contains(&y) {
                return Err(format!("vertex outside the frame: {pair}"));
            }
        }
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("budget safety", budget_safety),
        ("upper bound conformance", upper_bound_conformance),
        ("per-level bound conformance", per_level_conformance),
        ("rank invariance", rank_invariance),
        ("polynomial rate", rate_check),
        ("exact optimum recovery", exact_recovery),
        ("lower/upper sandwich", sandwich),
        ("lambert w", lambert),
        ("instance verifier", verifier),
        ("benchmark sanity", benchmark_sanity),
        ("desk run", desk_run),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
