use std::fmt;

use serde::Serialize;

use super::upper::{elementary_bound, theorem3_bound, Regime};
use crate::error::Result;
use crate::fidelity::CostToBiasModel;
use crate::instances::SmoothnessProfile;
use crate::kometo::effective_budget;

/// Asymptotic shape of the regret, up to constants and logarithmic factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RateTag {
    /// `Λ^{−p}`.
    Polynomial { exponent: f64 },
    /// `Λ^{−p} + Λ^{−q}`.
    PolynomialSum { exponents: [f64; 2] },
    /// `exp(−Λ^{p})`.
    Exponential { power: f64 },
    /// `exp(−Λ^{p}) + exp(−Λ^{q})`.
    ExponentialSum { powers: [f64; 2] },
}

impl fmt::Display for RateTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RateTag::Polynomial { exponent } => write!(f, "O~(L^-{exponent:.4})"),
            RateTag::PolynomialSum { exponents: [a, b] } => {
                write!(f, "O~(L^-{a:.4} + L^-{b:.4})")
            }
            RateTag::Exponential { power } => write!(f, "exp(-O~(L^{power:.4}))"),
            RateTag::ExponentialSum { powers: [a, b] } => {
                write!(f, "exp(-O~(L^{a:.4})) + exp(-O~(L^{b:.4}))")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Rate {
    pub tag: RateTag,
    pub regime: Regime,
    /// Elementary closed-form upper bound at this budget.
    pub envelope: f64,
}

pub fn rate_tag(p: &SmoothnessProfile, model: &CostToBiasModel, regime: Regime) -> RateTag {
    let d = p.d;
    match (*model, d > 0.0, regime) {
        (CostToBiasModel::PolyDecay { alpha, .. }, false, _) => {
            RateTag::Polynomial { exponent: alpha }
        }
        (CostToBiasModel::PolyDecay { alpha, .. }, true, Regime::High) => RateTag::Polynomial {
            exponent: 1.0 / (d + 1.0 / alpha),
        },
        (CostToBiasModel::PolyDecay { alpha, .. }, true, Regime::Low) => RateTag::PolynomialSum {
            exponents: [1.0 / d, alpha],
        },
        (CostToBiasModel::ExpDecay { beta, .. }, false, Regime::High) => RateTag::Exponential {
            power: beta / (1.0 + beta),
        },
        (CostToBiasModel::ExpDecay { beta, .. }, false, Regime::Low) => RateTag::ExponentialSum {
            powers: [beta, 1.0],
        },
        (CostToBiasModel::Cutoff { .. }, false, _) => RateTag::Exponential { power: 1.0 },
        (_, true, _) => RateTag::Polynomial { exponent: 1.0 / d },
    }
}

/// Rate descriptor and elementary envelope at raw budget `Λ`, using the
/// closed-form effective budget for arity `p.k`.
pub fn corollary4_rate(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    budget: f64,
) -> Result<Rate> {
    let lt = effective_budget(budget, p.k) as f64;
    let regime = theorem3_bound(p, model, lt)?.regime;
    Ok(Rate {
        tag: rate_tag(p, model, regime),
        regime,
        envelope: elementary_bound(p, model, lt)?,
    })
}
