use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kometo::exec::Execution;
use kometo::fidelity::{CostScale, CostToBiasModel};
use kometo::harness::{
    adversarial_table, bounds_table, run_experiment, AlgorithmSpec, BudgetUnit, ExperimentConfig,
    InstanceSpec, OutputSpec,
};
use kometo::instances::{load_tree_instance, verify_membership, SmoothnessProfile};
use kometo::theory::LowerVariant;
use kometo::Error;

const CONFIG_ERROR: u8 = 2;
const VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "kometo",
    version,
    about = "Multi-fidelity tree search experiments"
)]
struct Cli {
    /// Run sweeps on a single thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a TOML config.
    Run { config: PathBuf },
    /// Sweep a named benchmark with budgets in multiples of the top cost.
    Bench(BenchArgs),
    /// Tabulate upper and lower regret bounds for one profile.
    Bounds(BoundArgs),
    /// Tabulate the adversarial lower bound of one construction.
    Adversarial {
        #[arg(long, value_enum)]
        variant: Variant,
        #[command(flatten)]
        bounds: BoundArgs,
    },
    /// Check that a saved tree instance belongs to its declared class.
    Verify {
        instance: PathBuf,
        #[arg(long, default_value_t = 20)]
        horizon: u32,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    A,
    B,
}

#[derive(Args)]
struct BenchArgs {
    name: String,
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 50.0, 100.0, 200.0, 400.0])]
    budgets: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = ["kometo".to_string(), "modified-sqrt".to_string(), "sequool".to_string()])]
    algos: Vec<String>,
    #[arg(long, value_delimiter = ',', default_values_t = [0])]
    seeds: Vec<u64>,
    /// Cost of the exact top fidelity.
    #[arg(long, default_value_t = 10.0)]
    top_cost: f64,
    /// `poly:A,alpha`, `exp:B,sigma,beta` or `cutoff:a`.
    #[arg(long, default_value = "poly:1,1", value_parser = parse_model)]
    model: CostToBiasModel,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct BoundArgs {
    #[arg(long, default_value_t = 1.0)]
    nu: f64,
    #[arg(long, default_value_t = 0.5)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    /// Width constant; the smallest admissible value when omitted.
    #[arg(long)]
    c: Option<f64>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value = "poly:1,1", value_parser = parse_model)]
    model: CostToBiasModel,
    #[arg(long, value_delimiter = ',', default_values_t = [1e3, 1e4, 1e5, 1e6])]
    budgets: Vec<f64>,
    #[arg(long)]
    json: bool,
}

impl BoundArgs {
    fn profile(&self) -> kometo::Result<SmoothnessProfile> {
        match self.c {
            Some(c) => SmoothnessProfile::new(self.nu, self.rho, self.d, c, self.k),
            None => SmoothnessProfile::with_min_constant(self.nu, self.rho, self.d, self.k),
        }
    }
}

fn parse_model(s: &str) -> Result<CostToBiasModel, String> {
    let (kind, args) = s.split_once(':').unwrap_or((s, ""));
    let nums: Vec<f64> = args
        .split(',')
        .filter(|t| !t.is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    let model = match (kind, nums.as_slice()) {
        ("poly", &[a, alpha]) => CostToBiasModel::PolyDecay { a, alpha },
        ("exp", &[b, sigma, beta]) => CostToBiasModel::ExpDecay { b, sigma, beta },
        ("cutoff", &[a]) => CostToBiasModel::Cutoff { a },
        _ => {
            return Err(format!(
                "cannot read model `{s}`; use poly:A,alpha | exp:B,sigma,beta | cutoff:a"
            ))
        }
    };
    model.validate().map_err(|e| e.to_string())?;
    Ok(model)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::Parameter(_)
        | Error::UnknownBenchmark(_)
        | Error::Format { .. }
        | Error::Io { .. } => CONFIG_ERROR,
        _ => 1,
    }
}

fn sweep(config: &ExperimentConfig, exec: Execution) -> kometo::Result<()> {
    let rows = run_experiment(config, exec)?;
    let skipped = rows.iter().filter(|r| r.is_skipped()).count();
    println!(
        "{} rows written to {} ({} skipped)",
        rows.len(),
        config.output.csv.display(),
        skipped
    );
    if let Some(svg) = &config.output.svg {
        println!("plot written to {}", svg.display());
    }
    Ok(())
}

fn bench(args: BenchArgs, exec: Execution) -> kometo::Result<()> {
    let algorithms = args
        .algos
        .iter()
        .map(|a| AlgorithmSpec::from_label(a))
        .collect::<kometo::Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        instance: InstanceSpec::Benchmark {
            name: args.name.clone(),
            model: args.model,
        },
        cost_scale: CostScale::Capped {
            top_cost: args.top_cost,
        },
        algorithms,
        budgets: args.budgets,
        budget_unit: BudgetUnit::TopCost,
        seeds: args.seeds,
        theorem3_overlay: false,
        output: OutputSpec {
            csv: args.out_dir.join(format!("{}.csv", args.name)),
            svg: Some(args.out_dir.join(format!("{}.svg", args.name))),
        },
    };
    sweep(&config, exec)
}

fn bounds(args: &BoundArgs) -> kometo::Result<()> {
    let rows = bounds_table(&args.profile()?, &args.model, &args.budgets)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        );
        return Ok(());
    }
    println!(
        "{:>12} {:>8} {:>6} {:>10} {:>12} {:>12} {:>12}  rate",
        "budget", "eff", "regime", "depth", "upper", "lower", "envelope"
    );
    for r in rows {
        let lower = r.lower.map_or("-".to_string(), |l| format!("{l:.4e}"));
        println!(
            "{:>12.4e} {:>8} {:>6} {:>10.4} {:>12.4e} {:>12} {:>12.4e}  {}",
            r.budget,
            r.lambda_tilde,
            format!("{:?}", r.regime).to_lowercase(),
            r.depth,
            r.upper,
            lower,
            r.envelope,
            r.rate
        );
    }
    Ok(())
}

fn adversarial(variant: Variant, args: &BoundArgs) -> kometo::Result<()> {
    let variant = match variant {
        Variant::A => LowerVariant::A,
        Variant::B => LowerVariant::B,
    };
    let rows = adversarial_table(&args.profile()?, &args.model, &args.budgets, variant);
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&rows).expect("rows serialize")
        );
        return Ok(());
    }
    println!("{:>12} {:>14}", "budget", "lower bound");
    for (budget, value) in rows {
        println!("{budget:>12.4e} {value:>14.6e}");
    }
    Ok(())
}

fn verify(path: &Path, horizon: u32) -> kometo::Result<u8> {
    let inst = load_tree_instance(path)?;
    let report = verify_membership(&inst, horizon);
    println!(
        "{}",
        serde_json::to_string_pretty(&report).expect("report serializes")
    );
    Ok(if report.passed() { 0 } else { VIOLATION })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let exec = if cli.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let outcome = match cli.command {
        Command::Run { config } => ExperimentConfig::load(&config)
            .and_then(|c| sweep(&c, exec))
            .map(|()| 0),
        Command::Bench(args) => bench(args, exec).map(|()| 0),
        Command::Bounds(args) => bounds(&args).map(|()| 0),
        Command::Adversarial { variant, bounds } => adversarial(variant, &bounds).map(|()| 0),
        Command::Verify { instance, horizon } => verify(&instance, horizon),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
