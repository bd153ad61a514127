use std::f64::consts::E;

use serde::Serialize;

use super::lambert::{lambert_w, lambert_w_lower};
use crate::error::Result;
use crate::fidelity::CostToBiasModel;
use crate::instances::SmoothnessProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    High,
    Low,
}

/// Upper bound on the simple regret of the optimizer for an effective budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperBound {
    pub regime: Regime,
    /// The depth the bound is evaluated at.
    pub h: f64,
    pub h1: f64,
    pub h2: Option<f64>,
    pub regret_bound: f64,
}

/// Depths solving the defining equations, with `W` supplied so the same
/// formulas also produce the elementary envelopes.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Depths {
    pub h1: f64,
    pub h2: Option<f64>,
}

/// `W(κ·x)/κ`, or `x` itself when `κ = 0`.
fn solve(kappa: f64, x: f64, w: &dyn Fn(f64) -> f64) -> f64 {
    if kappa == 0.0 {
        x
    } else {
        w(kappa * x) / kappa
    }
}

/// `max(1/(2σ), ln(B/ν))`.
pub fn exp_decay_threshold(nu: f64, b: f64, sigma: f64) -> f64 {
    (1.0 / (2.0 * sigma)).max((b / nu).ln())
}

pub(crate) fn depths(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    lt: f64,
    w: &dyn Fn(f64) -> f64,
) -> Depths {
    let l = p.log_inv_rho();
    let (nu, c, d) = (p.nu, p.c, p.d);
    match *model {
        CostToBiasModel::PolyDecay { a, alpha } => {
            let inv = 1.0 / alpha;
            let x = lt * nu.powf(inv) / (4.0 * c * E * a.powf(inv));
            let h1 = solve((d + inv) * l, x, w);
            let h2 = solve(d * l, lt / (4.0 * c), w);
            Depths { h1, h2: Some(h2) }
        }
        CostToBiasModel::ExpDecay { b, sigma, beta } => {
            let ratio = beta / (beta + 1.0);
            let x = (lt / (4.0 * c * E)).powf(ratio)
                * (1.0 / (2.0 * sigma * l)).powf(1.0 / (beta + 1.0));
            let h1 = solve(ratio * d * l, x, w);
            let ab = exp_decay_threshold(nu, b, sigma);
            let x2 = lt / (4.0 * c * E * (2.0 * sigma * ab).powf(1.0 / beta));
            let h2 = solve(d * l, x2, w);
            Depths { h1, h2: Some(h2) }
        }
        CostToBiasModel::Cutoff { a } => Depths {
            h1: solve(d * l, lt / (4.0 * c * a * E), w),
            h2: None,
        },
    }
}

fn exact_w(x: f64) -> f64 {
    lambert_w(x).expect("arguments are non-negative")
}

pub(crate) fn regime(p: &SmoothnessProfile, model: &CostToBiasModel, lt: f64, h1: f64) -> Regime {
    let high = match *model {
        CostToBiasModel::PolyDecay { a, alpha } => p.nu * p.rho.powf(h1) <= alpha.exp() * a,
        CostToBiasModel::ExpDecay { b, sigma, .. } => {
            h1 >= exp_decay_threshold(p.nu, b, sigma) / p.log_inv_rho()
        }
        CostToBiasModel::Cutoff { a } => lt >= a,
    };
    if high {
        Regime::High
    } else {
        Regime::Low
    }
}

pub(crate) fn bound_at(p: &SmoothnessProfile, model: &CostToBiasModel, lt: f64, h: f64) -> f64 {
    let head = p.nu / p.rho * p.rho.powf(h);
    match *model {
        CostToBiasModel::PolyDecay { a, alpha } => 3.0 * head + 2.0 * a / lt.powf(alpha),
        CostToBiasModel::ExpDecay { b, sigma, beta } => {
            3.0 * head + 2.0 * b * (-lt.powf(beta) / sigma).exp()
        }
        CostToBiasModel::Cutoff { .. } => head,
    }
}

/// Regime selection and regret bound for effective budget `Λ̃`.
///
/// Budgets below one give the trivial bound `ν/ρ` in the low regime.
pub fn theorem3_bound(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    lambda_tilde: f64,
) -> Result<UpperBound> {
    p.validate()?;
    model.validate()?;
    if lambda_tilde.is_nan() || lambda_tilde < 1.0 {
        return Ok(UpperBound {
            regime: Regime::Low,
            h: 0.0,
            h1: 0.0,
            h2: None,
            regret_bound: p.nu / p.rho,
        });
    }
    let ds = depths(p, model, lambda_tilde, &exact_w);
    let regime = regime(p, model, lambda_tilde, ds.h1);
    let h = match (regime, ds.h2) {
        (Regime::Low, Some(h2)) => h2,
        _ => ds.h1,
    };
    Ok(UpperBound {
        regime,
        h,
        h1: ds.h1,
        h2: ds.h2,
        regret_bound: bound_at(p, model, lambda_tilde, h),
    })
}

/// Relative residual of the defining equation of `h1` (or `h2`) at `h`.
pub fn fixed_point_residual(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    lt: f64,
    h: f64,
    second: bool,
) -> f64 {
    let l = p.log_inv_rho();
    let rhs = p.c * (p.d * l * h).exp();
    let lhs = match (*model, second) {
        (CostToBiasModel::PolyDecay { a, alpha }, false) => {
            lt * p.nu.powf(1.0 / alpha) * p.rho.powf(h / alpha)
                / (4.0 * E * a.powf(1.0 / alpha) * h)
        }
        (CostToBiasModel::PolyDecay { .. }, true) => lt / (4.0 * h),
        (CostToBiasModel::ExpDecay { sigma, beta, .. }, false) => {
            lt / (4.0 * h * E * (2.0 * sigma * h * l).powf(1.0 / beta))
        }
        (CostToBiasModel::ExpDecay { b, sigma, beta }, true) => {
            let ab = exp_decay_threshold(p.nu, b, sigma);
            lt / (4.0 * h * E * (2.0 * sigma * ab).powf(1.0 / beta))
        }
        (CostToBiasModel::Cutoff { a }, _) => lt / (4.0 * a * E * h),
    };
    (lhs - rhs).abs() / rhs.abs().max(f64::MIN_POSITIVE)
}

/// The bound with `W` replaced by its elementary lower bound, at the regime
/// the exact computation selects. Always at least [`theorem3_bound`].
pub(crate) fn elementary_bound(
    p: &SmoothnessProfile,
    model: &CostToBiasModel,
    lt: f64,
) -> Result<f64> {
    let exact = theorem3_bound(p, model, lt)?;
    if lt.is_nan() || lt < 1.0 {
        return Ok(exact.regret_bound);
    }
    let lower = depths(p, model, lt, &lambert_w_lower);
    let h = match (exact.regime, lower.h2) {
        (Regime::Low, Some(h2)) => h2,
        _ => lower.h1,
    };
    Ok(bound_at(p, model, lt, h.min(exact.h)))
}

/// Both hypotheses of the per-level conformance lemma, for `Ψ = Φ` of `model`.
pub fn lemma7_conditions(
    p: &SmoothnessProfile,
    psi: &CostToBiasModel,
    lambda_tilde: f64,
    j: u32,
    h_tilde: f64,
) -> bool {
    if h_tilde.is_nan() || h_tilde <= 0.0 {
        return false;
    }
    let cost = (j as f64).exp();
    let first = psi.phi_unchecked(cost) <= p.nu * p.rho.powf(h_tilde);
    let second = lambda_tilde / (4.0 * h_tilde * cost) >= p.c * p.rho.powf(-p.d * h_tilde);
    first && second
}

/// `(3ν/ρ)ρ^h̃ + 2Ψ(Λ̃)`.
pub fn lemma7_bound(
    p: &SmoothnessProfile,
    psi: &CostToBiasModel,
    lambda_tilde: f64,
    h_tilde: f64,
) -> f64 {
    3.0 * p.nu / p.rho * p.rho.powf(h_tilde) + 2.0 * psi.phi_unchecked(lambda_tilde.max(1.0))
}

/// Largest `h̃` for which both hypotheses hold at level `j`, if any.
///
/// Both hypotheses are monotone in `h̃`, so the feasible set is an interval
/// `(0, h*]`.
pub fn lemma7_max_depth(
    p: &SmoothnessProfile,
    psi: &CostToBiasModel,
    lambda_tilde: f64,
    j: u32,
) -> Option<f64> {
    let l = p.log_inv_rho();
    let cost = (j as f64).exp();
    let bias = psi.phi_unchecked(cost);
    let from_bias = if bias == 0.0 {
        f64::INFINITY
    } else {
        (p.nu / bias).ln() / l
    };
    let from_width = solve(p.d * l, lambda_tilde / (4.0 * cost * p.c), &exact_w);
    let mut h = from_bias.min(from_width);
    if !h.is_finite() || h <= 0.0 {
        return None;
    }
    for _ in 0..64 {
        if lemma7_conditions(p, psi, lambda_tilde, j, h) {
            return Some(h);
        }
        h *= 1.0 - 1e-13;
    }
    None
}
