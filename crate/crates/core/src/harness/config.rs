use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::baselines::OpeningSchedule;
use crate::error::{Error, Result};
use crate::fidelity::{CostScale, CostToBiasModel, MultiFidelityFunction};
use crate::instances::{
    benchmark_by_name, load_tree_instance, random_tree_instance, single_branch_instance,
    BranchRule, SmoothnessProfile,
};
use crate::kometo::KometoConfig;

/// A sweep: one instance family, several algorithms, a budget grid, seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    #[serde(default)]
    pub cost_scale: CostScale,
    pub algorithms: Vec<AlgorithmSpec>,
    pub budgets: Vec<f64>,
    #[serde(default)]
    pub budget_unit: BudgetUnit,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Adds a row per budget with the upper bound on Kometo's regret; only
    /// meaningful for tree instances.
    #[serde(default)]
    pub theorem3_overlay: bool,
    pub output: OutputSpec,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: PathBuf,
    #[serde(default)]
    pub svg: Option<PathBuf>,
}

/// Whether budgets are absolute or multiples of the top-fidelity cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetUnit {
    /// Multiples of `λ(1)`; absolute when `λ(1)` is infinite.
    #[default]
    TopCost,
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    Benchmark {
        name: String,
        model: CostToBiasModel,
    },
    TreeFile {
        path: PathBuf,
    },
    /// A fresh random tree per seed.
    RandomTree {
        profile: SmoothnessProfile,
        model: CostToBiasModel,
        depth: u32,
    },
    SingleBranch {
        profile: SmoothnessProfile,
        model: CostToBiasModel,
        #[serde(default = "one")]
        dim: usize,
    },
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    Kometo {
        #[serde(default = "two")]
        arity: usize,
        #[serde(default)]
        budget_optimization: bool,
        #[serde(default = "yes")]
        lazy_child_evaluation: bool,
        #[serde(default = "yes")]
        parent_reuse: bool,
    },
    Sequool {
        #[serde(default = "two")]
        arity: usize,
    },
    ModifiedSqrt {
        #[serde(default = "two")]
        arity: usize,
    },
    ModifiedLog {
        #[serde(default = "two")]
        arity: usize,
    },
}

fn yes() -> bool {
    true
}

impl AlgorithmSpec {
    pub fn kometo(config: KometoConfig) -> Self {
        AlgorithmSpec::Kometo {
            arity: config.arity,
            budget_optimization: config.budget_optimization,
            lazy_child_evaluation: config.lazy_child_evaluation,
            parent_reuse: config.parent_reuse,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            AlgorithmSpec::Kometo { .. } => "kometo",
            AlgorithmSpec::Sequool { .. } => "sequool",
            AlgorithmSpec::ModifiedSqrt { .. } => "modified-sqrt",
            AlgorithmSpec::ModifiedLog { .. } => "modified-log",
        }
    }

    pub fn arity(&self) -> usize {
        match *self {
            AlgorithmSpec::Kometo { arity, .. }
            | AlgorithmSpec::Sequool { arity }
            | AlgorithmSpec::ModifiedSqrt { arity }
            | AlgorithmSpec::ModifiedLog { arity } => arity,
        }
    }

    pub fn kometo_config(&self) -> Option<KometoConfig> {
        match *self {
            AlgorithmSpec::Kometo {
                arity,
                budget_optimization,
                lazy_child_evaluation,
                parent_reuse,
            } => Some(KometoConfig {
                arity,
                budget_optimization,
                lazy_child_evaluation,
                parent_reuse,
            }),
            _ => None,
        }
    }

    /// The opening schedule of a baseline; its parameter is refitted per run.
    pub fn schedule(&self) -> Option<OpeningSchedule> {
        match self {
            AlgorithmSpec::Kometo { .. } => None,
            AlgorithmSpec::Sequool { .. } => Some(OpeningSchedule::SequOOL { n: 0 }),
            AlgorithmSpec::ModifiedSqrt { .. } => Some(OpeningSchedule::ModifiedSqrt { n: 0 }),
            AlgorithmSpec::ModifiedLog { .. } => Some(OpeningSchedule::ModifiedLog { n: 0 }),
        }
    }

    /// Parses the short names used on the command line.
    pub fn from_label(label: &str) -> Result<Self> {
        let spec = match label {
            "kometo" => AlgorithmSpec::kometo(KometoConfig::default()),
            "kometo-opt" => AlgorithmSpec::kometo(KometoConfig {
                budget_optimization: true,
                ..KometoConfig::default()
            }),
            "sequool" => AlgorithmSpec::Sequool { arity: 2 },
            "modified-sqrt" => AlgorithmSpec::ModifiedSqrt { arity: 2 },
            "modified-log" => AlgorithmSpec::ModifiedLog { arity: 2 },
            other => {
                return Err(Error::Config {
                    path: "algorithms".into(),
                    message: format!("unknown algorithm `{other}`"),
                })
            }
        };
        Ok(spec)
    }
}

/// An instance materialized for one seed.
pub struct BuiltInstance {
    pub name: String,
    pub function: Arc<dyn MultiFidelityFunction>,
    pub model: CostToBiasModel,
    pub profile: Option<SmoothnessProfile>,
}

impl InstanceSpec {
    pub fn model(&self) -> Option<CostToBiasModel> {
        match self {
            InstanceSpec::Benchmark { model, .. }
            | InstanceSpec::RandomTree { model, .. }
            | InstanceSpec::SingleBranch { model, .. } => Some(*model),
            InstanceSpec::TreeFile { .. } => None,
        }
    }

    pub fn build(&self, seed: u64) -> Result<BuiltInstance> {
        let tree = match self {
            InstanceSpec::Benchmark { name, model } => {
                let b = benchmark_by_name(name)?;
                return Ok(BuiltInstance {
                    name: b.name().to_string(),
                    function: Arc::new(b.clone()),
                    model: *model,
                    profile: None,
                });
            }
            InstanceSpec::TreeFile { path } => load_tree_instance(path)?,
            InstanceSpec::RandomTree {
                profile,
                model,
                depth,
            } => random_tree_instance(*profile, *model, *depth, seed)?,
            InstanceSpec::SingleBranch {
                profile,
                model,
                dim,
            } => single_branch_instance(*profile, *model, BranchRule::Seeded(seed), *dim)?,
        };
        Ok(BuiltInstance {
            name: tree.name().to_string(),
            model: *tree.model(),
            profile: Some(*tree.profile()),
            function: Arc::new(tree),
        })
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: String| Error::Config {
            path: path.to_string(),
            message,
        };
        if self.algorithms.is_empty() {
            return Err(bad(
                "algorithms",
                "at least one algorithm is required".into(),
            ));
        }
        for (i, a) in self.algorithms.iter().enumerate() {
            if a.arity() < 2 {
                return Err(bad(
                    &format!("algorithms[{i}].arity"),
                    "must be at least 2".into(),
                ));
            }
        }
        if self.budgets.is_empty() {
            return Err(bad("budgets", "at least one budget is required".into()));
        }
        if let Some(i) = self
            .budgets
            .iter()
            .position(|b| !(b.is_finite() && *b >= 1.0))
        {
            return Err(bad(
                &format!("budgets[{i}]"),
                "budgets must be finite and at least 1".into(),
            ));
        }
        if self.seeds.is_empty() {
            return Err(bad("seeds", "at least one seed is required".into()));
        }
        self.cost_scale
            .validate()
            .map_err(|e| bad("cost_scale", e.to_string()))?;
        if let Some(m) = self.instance.model() {
            m.validate()
                .map_err(|e| bad("instance.model", e.to_string()))?;
        }
        if let InstanceSpec::Benchmark { name, .. } = &self.instance {
            name.parse::<crate::instances::BenchmarkName>()
                .map_err(|e| bad("instance.name", e.to_string()))?;
        }
        Ok(())
    }

    /// The absolute budget a grid entry stands for.
    pub fn absolute_budget(&self, entry: f64) -> f64 {
        match (self.budget_unit, self.cost_scale.top_cost()) {
            (BudgetUnit::TopCost, Some(top)) => entry * top,
            _ => entry,
        }
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            path: origin.display().to_string(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::from_toml_str(&text, path)
    }
}
