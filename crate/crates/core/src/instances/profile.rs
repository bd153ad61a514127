use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothness parameters `(ν, ρ)`, near-optimality dimension `d` with its
/// constant `C`, and the partition arity `K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmoothnessProfile {
    pub nu: f64,
    pub rho: f64,
    pub d: f64,
    pub c: f64,
    #[serde(default = "default_arity")]
    pub k: usize,
}

fn default_arity() -> usize {
    2
}

impl SmoothnessProfile {
    /// Checks the parameter ranges. `C` is only required to be positive here;
    /// whether it reaches [`SmoothnessProfile::c_min`] is part of instance
    /// verification.
    pub fn new(nu: f64, rho: f64, d: f64, c: f64, k: usize) -> Result<Self> {
        let p = SmoothnessProfile { nu, rho, d, c, k };
        p.validate()?;
        Ok(p)
    }

    /// A profile whose constant is the smallest admissible one.
    pub fn with_min_constant(nu: f64, rho: f64, d: f64, k: usize) -> Result<Self> {
        let mut p = SmoothnessProfile {
            nu,
            rho,
            d,
            c: 1.0,
            k,
        };
        p.validate()?;
        p.c = p.c_min();
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::param(format!(
                "nu must be positive, got {}",
                self.nu
            )));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::param(format!(
                "rho must lie in (0, 1), got {}",
                self.rho
            )));
        }
        if self.k < 2 {
            return Err(Error::param(format!(
                "arity must be at least 2, got {}",
                self.k
            )));
        }
        let d_max = self.d_max();
        if !(self.d >= 0.0 && self.d <= d_max * (1.0 + 1e-12)) {
            return Err(Error::param(format!(
                "d must lie in [0, {d_max}], got {}",
                self.d
            )));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::param(format!("C must be positive, got {}", self.c)));
        }
        Ok(())
    }

    /// `ln(1/ρ)`.
    pub fn log_inv_rho(&self) -> f64 {
        -self.rho.ln()
    }

    /// `ln K / ln(1/ρ)`, the dimension every function trivially satisfies.
    pub fn d_max(&self) -> f64 {
        (self.k as f64).ln() / self.log_inv_rho()
    }

    /// `⌊ln 3 / ln(1/ρ)⌋`.
    pub fn h0(&self) -> u32 {
        (3f64.ln() / self.log_inv_rho()).floor() as u32
    }

    /// `(K / ρ^{−d})^{h0}`.
    pub fn c_min(&self) -> f64 {
        (self.k as f64 * self.rho.powf(self.d)).powi(self.h0() as i32)
    }

    /// `ρ^{−d·h}`, the per-depth node allowance before the floor.
    pub fn width_allowance(&self, h: u32) -> f64 {
        self.rho.powf(-self.d * h as f64)
    }

    /// `⌊ρ^{−d·h}⌋`, computed so that exact integers are not lost to
    /// rounding just below them.
    pub fn width_cap(&self, h: u32) -> u128 {
        let v = self.width_allowance(h);
        let r = v.round();
        let f = if (v - r).abs() <= 1e-9 * r.max(1.0) {
            r
        } else {
            v.floor()
        };
        if f >= u128::MAX as f64 {
            u128::MAX
        } else {
            f as u128
        }
    }
}
