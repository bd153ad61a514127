//! Fidelity space, cost and bias models, and the budgeted evaluation
//! environment through which optimizers observe function values.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Bounds;

/// Parametric cost-to-bias function `Φ: [1, ∞) → [0, ∞]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostToBiasModel {
    /// `Φ(c) = A / c^α`.
    PolyDecay { a: f64, alpha: f64 },
    /// `Φ(c) = B · exp(−c^β / σ)`.
    ExpDecay { b: f64, sigma: f64, beta: f64 },
    /// `Φ(c) = ∞` below the cutoff `a`, `0` from it on.
    Cutoff { a: f64 },
}

impl CostToBiasModel {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            CostToBiasModel::PolyDecay { a, alpha } => a > 0.0 && alpha > 0.0,
            CostToBiasModel::ExpDecay { b, sigma, beta } => b > 0.0 && sigma > 0.0 && beta > 0.0,
            CostToBiasModel::Cutoff { a } => a >= 1.0,
        };
        let finite = match *self {
            CostToBiasModel::PolyDecay { a, alpha } => a.is_finite() && alpha.is_finite(),
            CostToBiasModel::ExpDecay { b, sigma, beta } => {
                b.is_finite() && sigma.is_finite() && beta.is_finite()
            }
            CostToBiasModel::Cutoff { a } => a.is_finite(),
        };
        if ok && finite {
            Ok(())
        } else {
            Err(Error::param(format!(
                "invalid cost-to-bias parameters: {self}"
            )))
        }
    }

    /// `Φ(c)`; costs below 1 are outside the model's domain.
    pub fn phi(&self, c: f64) -> Result<f64> {
        if c.is_nan() || c < 1.0 {
            return Err(Error::domain(format!("cost must be at least 1, got {c}")));
        }
        Ok(self.phi_unchecked(c))
    }

    pub(crate) fn phi_unchecked(&self, c: f64) -> f64 {
        match *self {
            CostToBiasModel::PolyDecay { a, alpha } => a / c.powf(alpha),
            CostToBiasModel::ExpDecay { b, sigma, beta } => b * (-c.powf(beta) / sigma).exp(),
            CostToBiasModel::Cutoff { a } => {
                if c < a {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
        }
    }

    /// Smallest cost `c ≥ 1` with `Φ(c) ≤ y`, or `+∞` when no cost reaches it.
    pub fn min_cost_for_bias(&self, y: f64) -> f64 {
        if y.is_nan() || y < 0.0 {
            return f64::INFINITY;
        }
        match *self {
            CostToBiasModel::PolyDecay { a, alpha } => {
                if y == 0.0 {
                    f64::INFINITY
                } else {
                    (a / y).powf(1.0 / alpha).max(1.0)
                }
            }
            CostToBiasModel::ExpDecay { b, sigma, beta } => {
                if y >= b {
                    1.0
                } else if y == 0.0 {
                    f64::INFINITY
                } else {
                    (sigma * (b / y).ln()).powf(1.0 / beta).max(1.0)
                }
            }
            CostToBiasModel::Cutoff { a } => a,
        }
    }
}

impl fmt::Display for CostToBiasModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CostToBiasModel::PolyDecay { a, alpha } => write!(f, "poly(A={a}, alpha={alpha})"),
            CostToBiasModel::ExpDecay { b, sigma, beta } => {
                write!(f, "exp(B={b}, sigma={sigma}, beta={beta})")
            }
            CostToBiasModel::Cutoff { a } => write!(f, "cutoff(a={a})"),
        }
    }
}

/// How fidelities `z ∈ [0, 1]` map to costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostScale {
    /// `λ(z) = 1/(1 − z)`: every cost is reachable exactly and `λ(1) = ∞`.
    #[default]
    Unbounded,
    /// `λ(z) = 1 + z·(top − 1)`: costs saturate at `λ(1) = top`, and the
    /// top fidelity is the target itself.
    Capped { top_cost: f64 },
}

impl CostScale {
    pub fn validate(&self) -> Result<()> {
        match *self {
            CostScale::Unbounded => Ok(()),
            CostScale::Capped { top_cost } if top_cost.is_finite() && top_cost > 1.0 => Ok(()),
            CostScale::Capped { top_cost } => Err(Error::param(format!(
                "capped cost scale needs a finite top cost above 1, got {top_cost}"
            ))),
        }
    }

    /// `λ(z)`.
    pub fn lambda(&self, z: f64) -> f64 {
        match *self {
            CostScale::Unbounded => {
                if z >= 1.0 {
                    f64::INFINITY
                } else {
                    1.0 / (1.0 - z)
                }
            }
            CostScale::Capped { top_cost } => 1.0 + z * (top_cost - 1.0),
        }
    }

    /// `λ(1)`, when finite.
    pub fn top_cost(&self) -> Option<f64> {
        match *self {
            CostScale::Unbounded => None,
            CostScale::Capped { top_cost } => Some(top_cost),
        }
    }

    /// The fidelity `z_c` served for a request of cost `c`.
    pub fn fidelity_for_cost(&self, c: f64) -> f64 {
        match *self {
            CostScale::Unbounded => 1.0 - 1.0 / c,
            CostScale::Capped { top_cost } => ((c - 1.0) / (top_cost - 1.0)).min(1.0),
        }
    }

    /// `λ(z_c)`, the amount charged for a request of cost `c`.
    pub fn charge(&self, c: f64) -> f64 {
        match *self {
            CostScale::Unbounded => c,
            CostScale::Capped { top_cost } => c.min(top_cost),
        }
    }
}

/// A cost-to-bias model paired with the cost scale realizing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySchedule {
    pub model: CostToBiasModel,
    #[serde(default)]
    pub scale: CostScale,
}

impl FidelitySchedule {
    pub fn new(model: CostToBiasModel, scale: CostScale) -> Result<Self> {
        model.validate()?;
        scale.validate()?;
        Ok(FidelitySchedule { model, scale })
    }

    pub fn unbounded(model: CostToBiasModel) -> Result<Self> {
        FidelitySchedule::new(model, CostScale::Unbounded)
    }

    /// `ζ(z)`.
    pub fn bias(&self, z: f64) -> f64 {
        match self.scale {
            CostScale::Capped { .. } if z >= 1.0 => 0.0,
            _ => self.model.phi_unchecked(self.scale.lambda(z).max(1.0)),
        }
    }

    /// `ζ(z_c)`, computed from `c` directly so that no rounding goes through `z`.
    pub fn bias_at_cost(&self, c: f64) -> f64 {
        match self.scale {
            CostScale::Capped { top_cost } if c >= top_cost => 0.0,
            _ => self.model.phi_unchecked(c.max(1.0)),
        }
    }
}

/// A strictly increasing per-fidelity transform applied to observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Distortion {
    #[default]
    Identity,
    /// `v ↦ (1 + 3z)·v`.
    Scale,
    /// `v ↦ (1 + z)·v³`.
    Cubic,
    /// `v ↦ sinh(v) + z`.
    Sinh,
    /// `v ↦ sign(v)·ln(1 + |v|) − z`.
    SignedLog1p,
    /// `v ↦ (2 + z)·v + z/4`.
    Affine,
}

impl Distortion {
    pub const ALL: [Distortion; 6] = [
        Distortion::Identity,
        Distortion::Scale,
        Distortion::Cubic,
        Distortion::Sinh,
        Distortion::SignedLog1p,
        Distortion::Affine,
    ];

    pub fn apply(self, z: f64, v: f64) -> f64 {
        match self {
            Distortion::Identity => v,
            Distortion::Scale => (1.0 + 3.0 * z) * v,
            Distortion::Cubic => (1.0 + z) * v * v * v,
            Distortion::Sinh => v.sinh() + z,
            Distortion::SignedLog1p => v.signum() * v.abs().ln_1p() - z,
            Distortion::Affine => (2.0 + z) * v + z / 4.0,
        }
    }

    pub fn invert(self, z: f64, w: f64) -> f64 {
        match self {
            Distortion::Identity => w,
            Distortion::Scale => w / (1.0 + 3.0 * z),
            Distortion::Cubic => (w / (1.0 + z)).cbrt(),
            Distortion::Sinh => (w - z).asinh(),
            Distortion::SignedLog1p => {
                let u = w + z;
                u.signum() * u.abs().exp_m1()
            }
            Distortion::Affine => (w - z / 4.0) / (2.0 + z),
        }
    }
}

/// A target and its family of approximations.
pub trait MultiFidelityFunction: Send + Sync {
    fn name(&self) -> &str;
    fn domain(&self) -> &Bounds;
    /// The hidden target `f`.
    fn target(&self, x: &[f64]) -> f64;
    /// `f_z(x)`, for a fidelity whose bias bound is `bias = ζ(z)`.
    fn approximation(&self, x: &[f64], z: f64, bias: f64) -> f64;
    /// `sup f`.
    fn optimum(&self) -> f64;
}

/// `f_z = f − ζ(z)`: a target observed with a constant downward bias.
pub struct ShiftedFunction<F> {
    name: String,
    domain: Bounds,
    optimum: f64,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> ShiftedFunction<F> {
    pub fn new(name: impl Into<String>, domain: Bounds, optimum: f64, f: F) -> Self {
        ShiftedFunction {
            name: name.into(),
            domain,
            optimum,
            f,
        }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> MultiFidelityFunction for ShiftedFunction<F> {
    fn name(&self) -> &str {
        &self.name
    }
    fn domain(&self) -> &Bounds {
        &self.domain
    }
    fn target(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn approximation(&self, x: &[f64], _z: f64, bias: f64) -> f64 {
        (self.f)(x) - bias
    }
    fn optimum(&self) -> f64 {
        self.optimum
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationEvent {
    pub round: u64,
    pub point: Vec<f64>,
    pub fidelity: f64,
    pub charge: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetLedger {
    total: f64,
    spent: f64,
    events: Vec<EvaluationEvent>,
}

impl BudgetLedger {
    pub fn new(total: f64) -> Result<Self> {
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::param(format!(
                "budget must be positive and finite, got {total}"
            )));
        }
        Ok(BudgetLedger {
            total,
            spent: 0.0,
            events: Vec::new(),
        })
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn spent(&self) -> f64 {
        self.spent
    }

    pub fn remaining(&self) -> f64 {
        self.total - self.spent
    }

    pub fn events(&self) -> &[EvaluationEvent] {
        &self.events
    }

    /// Whether the charges could all be paid in order, using exactly the
    /// additions [`BudgetLedger::charge`] would perform.
    pub fn affords(&self, charges: impl IntoIterator<Item = f64>) -> bool {
        let mut spent = self.spent;
        for c in charges {
            spent += c;
            if spent > self.total {
                return false;
            }
        }
        true
    }

    fn charge(&mut self, point: &[f64], fidelity: f64, charge: f64) -> Result<u64> {
        let next = self.spent + charge;
        if next > self.total || charge.is_nan() {
            return Err(Error::BudgetExceeded {
                requested: charge,
                remaining: self.remaining(),
            });
        }
        self.spent = next;
        let round = self.events.len() as u64 + 1;
        self.events.push(EvaluationEvent {
            round,
            point: point.to_vec(),
            fidelity,
            charge,
        });
        Ok(round)
    }

    /// Recomputes the spend from the event log and checks it never exceeded
    /// the total.
    pub fn audit(&self) -> bool {
        let mut spent = 0.0;
        for e in &self.events {
            spent += e.charge;
            if spent > self.total {
                return false;
            }
        }
        spent == self.spent
    }
}

/// The only channel through which an optimizer observes values.
#[derive(Clone)]
pub struct Environment {
    function: Arc<dyn MultiFidelityFunction>,
    schedule: FidelitySchedule,
    distortion: Distortion,
    ledger: BudgetLedger,
}

impl fmt::Debug for Environment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Environment")
            .field("function", &self.function.name())
            .field("schedule", &self.schedule)
            .field("distortion", &self.distortion)
            .field("ledger", &self.ledger)
            .finish()
    }
}

impl Environment {
    pub fn new(
        function: Arc<dyn MultiFidelityFunction>,
        schedule: FidelitySchedule,
        budget: f64,
    ) -> Result<Self> {
        Ok(Environment {
            function,
            schedule,
            distortion: Distortion::Identity,
            ledger: BudgetLedger::new(budget)?,
        })
    }

    pub fn with_distortion(mut self, distortion: Distortion) -> Self {
        self.distortion = distortion;
        self
    }

    pub fn function(&self) -> &Arc<dyn MultiFidelityFunction> {
        &self.function
    }

    pub fn domain(&self) -> &Bounds {
        self.function.domain()
    }

    pub fn schedule(&self) -> &FidelitySchedule {
        &self.schedule
    }

    pub fn distortion(&self) -> Distortion {
        self.distortion
    }

    pub fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    pub fn budget(&self) -> f64 {
        self.ledger.total
    }

    pub fn spent(&self) -> f64 {
        self.ledger.spent
    }

    /// What a request of cost `c` would be charged.
    pub fn charge_for(&self, c: f64) -> f64 {
        self.schedule.scale.charge(c)
    }

    pub fn affords_costs(&self, costs: impl IntoIterator<Item = f64>) -> bool {
        let scale = self.schedule.scale;
        self.ledger
            .affords(costs.into_iter().map(|c| scale.charge(c)))
    }

    /// Serves `g_{z_c}(f_{z_c}(x))` and charges `λ(z_c)`.
    pub fn evaluate_at_cost(&mut self, x: &[f64], c: f64) -> Result<f64> {
        if c.is_nan() || c < 1.0 {
            return Err(Error::domain(format!("cost must be at least 1, got {c}")));
        }
        if !self.function.domain().contains(x) {
            return Err(Error::domain(format!(
                "point {x:?} lies outside the domain"
            )));
        }
        let z = self.schedule.scale.fidelity_for_cost(c);
        let charge = self.schedule.scale.charge(c);
        self.ledger.charge(x, z, charge)?;
        let bias = self.schedule.bias_at_cost(c);
        let raw = self.function.approximation(x, z, bias);
        Ok(self.distortion.apply(z, raw))
    }

    /// `sup f − f(x)`, clamped at zero; free of charge.
    pub fn regret(&self, x: &[f64]) -> f64 {
        (self.function.optimum() - self.function.target(x)).max(0.0)
    }
}
