//! Sweeps over algorithms, budgets and seeds, with CSV and SVG output and
//! tabulated theoretical bounds.

mod config;
mod output;

use std::sync::Mutex;
use std::time::Instant;

use serde::Serialize;

pub use config::{
    AlgorithmSpec, BudgetUnit, BuiltInstance, ExperimentConfig, InstanceSpec, OutputSpec,
};
pub use output::{
    emit_csv, emit_svg, read_csv, render_svg, sort_rows, CsvAppender, TraceRow, CSV_HEADER,
    REGRET_FLOOR,
};

use crate::baselines::run_baseline;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::fidelity::{CostToBiasModel, Environment, FidelitySchedule};
use crate::instances::SmoothnessProfile;
use crate::kometo::{self, effective_budget};
use crate::theory::{
    corollary4_rate, lemma6_bound, theorem1_lower, theorem3_bound, LowerVariant, Regime,
};

/// Pseudo-algorithm name of the upper-bound overlay rows.
pub const OVERLAY_ALGORITHM: &str = "theorem3-bound";

/// Runs one (algorithm, budget, seed) cell.
pub fn run_cell(
    config: &ExperimentConfig,
    algorithm: &AlgorithmSpec,
    budget_entry: f64,
    seed: u64,
) -> Result<TraceRow> {
    let inst = config.instance.build(seed)?;
    let budget = config.absolute_budget(budget_entry);
    let schedule = FidelitySchedule::new(inst.model, config.cost_scale)?;
    let mut env = Environment::new(inst.function, schedule, budget)?;
    let start = Instant::now();
    let outcome = match (algorithm.kometo_config(), algorithm.schedule()) {
        (Some(cfg), _) => Some(kometo::run(cfg, &mut env)?.trace),
        (None, Some(s)) => match run_baseline(s, algorithm.arity(), &mut env) {
            Ok(run) => Some(run.trace),
            Err(Error::Inapplicable(why)) => {
                log::info!("{} skipped on {}: {why}", algorithm.label(), inst.name);
                None
            }
            Err(e) => return Err(e),
        },
        (None, None) => unreachable!("every algorithm is either kometo or a baseline"),
    };
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(TraceRow {
        algorithm: algorithm.label().to_string(),
        instance: inst.name,
        budget,
        seed,
        spent: outcome.as_ref().map_or(0.0, |t| t.spent),
        regret: outcome.map(|t| t.regret),
        wall_ms,
    })
}

fn overlay_rows(config: &ExperimentConfig) -> Result<Vec<TraceRow>> {
    let Some(arity) = config
        .algorithms
        .iter()
        .find_map(|a| a.kometo_config().map(|c| c.arity))
    else {
        return Ok(Vec::new());
    };
    let mut rows = Vec::new();
    for &seed in &config.seeds {
        let inst = config.instance.build(seed)?;
        let Some(profile) = inst.profile else {
            return Ok(Vec::new());
        };
        for &entry in &config.budgets {
            let budget = config.absolute_budget(entry);
            let lt = effective_budget(budget, arity) as f64;
            let bound = theorem3_bound(&profile, &inst.model, lt)?;
            rows.push(TraceRow {
                algorithm: OVERLAY_ALGORITHM.to_string(),
                instance: inst.name.clone(),
                budget,
                seed,
                spent: budget,
                regret: Some(bound.regret_bound),
                wall_ms: 0.0,
            });
        }
    }
    Ok(rows)
}

/// Runs the full cartesian product of a config, appending each finished row
/// to the CSV as it completes, then rewrites the CSV sorted and draws the
/// SVG if requested.
pub fn run_experiment(config: &ExperimentConfig, exec: Execution) -> Result<Vec<TraceRow>> {
    config.validate()?;
    let mut cells = Vec::new();
    for alg in &config.algorithms {
        for &budget in &config.budgets {
            for &seed in &config.seeds {
                cells.push((alg, budget, seed));
            }
        }
    }
    let sink = Mutex::new(CsvAppender::create(&config.output.csv)?);
    let results = exec.map(cells, |(alg, budget, seed)| {
        let row = run_cell(config, alg, budget, seed)?;
        sink.lock()
            .unwrap_or_else(|poisoned| poisoned.into_inner())
            .append(&row)?;
        Ok(row)
    });
    drop(sink);
    let mut rows = results.into_iter().collect::<Result<Vec<_>>>()?;
    if config.theorem3_overlay {
        rows.extend(overlay_rows(config)?);
    }
    sort_rows(&mut rows);
    emit_csv(&rows, &config.output.csv)?;
    if let Some(svg) = &config.output.svg {
        emit_svg(&rows, svg)?;
    }
    Ok(rows)
}

/// Upper and lower bounds side by side at one budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub budget: f64,
    pub lambda_tilde: u64,
    pub regime: Regime,
    pub depth: f64,
    pub upper: f64,
    pub lower: Option<f64>,
    pub envelope: f64,
    pub rate: String,
}

pub fn bounds_table(
    profile: &SmoothnessProfile,
    model: &CostToBiasModel,
    budgets: &[f64],
) -> Result<Vec<BoundRow>> {
    budgets
        .iter()
        .map(|&budget| {
            let lt = effective_budget(budget, profile.k);
            let upper = theorem3_bound(profile, model, lt as f64)?;
            let lower = match theorem1_lower(profile, model, budget) {
                Ok(l) if l.is_valid(budget) => Some(l.value),
                Ok(_) | Err(Error::Case(_)) => None,
                Err(e) => return Err(e),
            };
            let rate = corollary4_rate(profile, model, budget)?;
            Ok(BoundRow {
                budget,
                lambda_tilde: lt,
                regime: upper.regime,
                depth: upper.h,
                upper: upper.regret_bound,
                lower,
                envelope: rate.envelope,
                rate: rate.tag.to_string(),
            })
        })
        .collect()
}

/// Adversarial lower-bound values for one construction variant.
pub fn adversarial_table(
    profile: &SmoothnessProfile,
    model: &CostToBiasModel,
    budgets: &[f64],
    variant: LowerVariant,
) -> Vec<(f64, f64)> {
    budgets
        .iter()
        .map(|&b| (b, lemma6_bound(profile, model, b, variant)))
        .collect()
}
