use serde::Serialize;

use crate::error::{Error, Result};
use crate::fidelity::CostToBiasModel;
use crate::instances::SmoothnessProfile;

/// A minimax lower bound together with the budget above which it holds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerBound {
    pub value: f64,
    /// The multiplicative or exponential rate constant.
    pub constant: f64,
    /// Budgets at or above this threshold get `value`; below it only
    /// `r_min` is guaranteed.
    pub valid_above: f64,
    pub r_min: f64,
}

impl LowerBound {
    pub fn is_valid(&self, budget: f64) -> bool {
        budget >= self.valid_above
    }
}

/// `(ν ρ / 2)·K^{−1/d}`; only defined for `d > 0`.
pub fn polynomial_width_constant(p: &SmoothnessProfile) -> Result<f64> {
    if p.d <= 0.0 {
        return Err(Error::Case(
            "the polynomial-width constant requires d > 0".into(),
        ));
    }
    Ok(p.nu * p.rho / 2.0 * (p.k as f64).powf(-1.0 / p.d))
}

fn width_threshold(p: &SmoothnessProfile, r: f64, min_cost: f64) -> f64 {
    (2.0 * r / (p.nu * p.rho)).powf(-p.d) * min_cost / p.k as f64
}

fn depth_threshold(p: &SmoothnessProfile, model: &CostToBiasModel, r: f64) -> f64 {
    let l = p.log_inv_rho();
    let levels = (p.nu / (4.0 * r)).ln() / (4.0 * l) - 2.0;
    let y = p.nu / p.rho * (4.0 * r / p.nu).powf(0.25);
    levels * model.min_cost_for_bias(y)
}

/// Lower bound on the minimax simple regret at budget `Λ`.
pub fn theorem1_lower(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    budget: f64,
) -> Result<LowerBound> {
    p.validate()?;
    model.validate()?;
    let l = p.log_inv_rho();
    let (nu, rho, d, k) = (p.nu, p.rho, p.d, p.k as f64);
    Ok(match *model {
        CostToBiasModel::PolyDecay { a, alpha } => {
            let inv = 1.0 / alpha;
            let constant = k.powf(-1.0 / (d + inv))
                * (2.0 / (nu * rho)).powf(-d / (d + inv))
                * (2.0 / (rho * a)).powf(-1.0 / (1.0 + d * alpha));
            let r_min = (rho * a / 2.0).min(nu * rho / 2.0);
            let valid_above =
                (2.0 * r_min / (nu * rho)).powf(-d) * (2.0 * r_min / (rho * a)).powf(-inv) / k;
            LowerBound {
                value: constant * budget.powf(-1.0 / (d + inv)),
                constant,
                valid_above,
                r_min,
            }
        }
        CostToBiasModel::ExpDecay { b, sigma, beta } if d == 0.0 => {
            let big_d = 4f64.powf(1.0 + 1.0 / beta) * l * sigma.powf(-1.0 / beta);
            let constant = 2.0 * big_d.powf(beta / (1.0 + beta));
            let l1 = (nu / 4.0).ln() - 8.0 * l;
            let l2 = ((b / nu).powi(4) * nu / 4.0).ln();
            let r_min = [
                nu * rho.powi(6) / 4.0,
                (rho * b / nu).powi(4) * nu / 4.0,
                (2.0 * l1).exp(),
                (2.0 * l2).exp(),
            ]
            .into_iter()
            .fold(f64::INFINITY, f64::min);
            LowerBound {
                value: (-constant * budget.powf(beta / (1.0 + beta))).exp(),
                constant,
                valid_above: depth_threshold(p, model, r_min),
                r_min,
            }
        }
        CostToBiasModel::Cutoff { a } if d == 0.0 => {
            let constant = 8.0 * l / a;
            let r_min = nu * rho.powi(6) / 4.0;
            let floor = a / (4.0 * l) * ((4.0 / nu).ln() + 8.0 * l);
            LowerBound {
                value: (-constant * budget).exp(),
                constant,
                valid_above: depth_threshold(p, model, r_min).max(floor),
                r_min,
            }
        }
        CostToBiasModel::ExpDecay { .. } | CostToBiasModel::Cutoff { .. } => {
            let constant = polynomial_width_constant(p)?;
            let r_min = nu * rho / 2.0;
            LowerBound {
                value: constant * budget.powf(-1.0 / d),
                constant,
                valid_above: width_threshold(p, r_min, 1.0),
                r_min,
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LowerVariant {
    /// Too many near-optimal cells to tell apart at the needed cost.
    A,
    /// A single branch too deep to follow at the needed cost.
    B,
}

/// Largest `r` in the variant's interval whose budget condition holds, or 0
/// when none does. The condition is monotone in `r`, so the supremum is found
/// by bisection on `ln r`.
pub fn lemma6_bound(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    budget: f64,
    variant: LowerVariant,
) -> f64 {
    let (upper, holds): (f64, Box<dyn Fn(f64) -> bool>) = match variant {
        LowerVariant::A => (
            p.nu * p.rho / 2.0,
            Box::new(move |r| {
                budget <= width_threshold(p, r, model.min_cost_for_bias(2.0 * r / p.rho))
            }),
        ),
        LowerVariant::B => (
            p.nu * p.rho.powi(6) / 4.0,
            Box::new(move |r| budget <= depth_threshold(p, model, r)),
        ),
    };
    if holds(upper) {
        return upper;
    }
    let mut lo = upper;
    loop {
        lo /= 1024.0;
        if lo < 1e-300 {
            return 0.0;
        }
        if holds(lo) {
            break;
        }
    }
    let mut hi = upper;
    for _ in 0..200 {
        if hi / lo - 1.0 <= 1e-12 {
            break;
        }
        let mid = (lo.ln() + (hi.ln() - lo.ln()) / 2.0).exp();
        if mid <= lo || mid >= hi {
            break;
        }
        if holds(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if variant == LowerVariant::B && lo > p.nu * p.rho.powi(12) / 4.0 {
        log::warn!(
            "depth-limited bound {lo:e} exceeds nu*rho^12/4; the two readings of its feasible set disagree here"
        );
    }
    lo
}
