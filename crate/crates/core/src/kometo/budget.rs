//! Budget preprocessing: the closed-form effective budget, the exploration
//! schedule it drives, and the worst-case spend used to enlarge it.

use std::f64::consts::E;

/// `⌊ln x⌋` for `x ≥ 1`, corrected so that `e^j ≤ x < e^{j+1}` holds for the
/// computed exponentials.
pub fn level_for(x: f64) -> u32 {
    if x.is_nan() || x < 1.0 {
        return 0;
    }
    let mut j = x.ln().floor().max(0.0) as u32;
    while j > 0 && (j as f64).exp() > x {
        j -= 1;
    }
    while ((j + 1) as f64).exp() <= x {
        j += 1;
    }
    j
}

/// Cost of a request at fidelity level `j`.
pub fn level_cost(j: u32) -> f64 {
    (j as f64).exp()
}

/// `⌊(e − 1)Λ / (2Ke(ln Λ + 1)²)⌋`.
pub fn effective_budget(budget: f64, arity: usize) -> u64 {
    if budget.is_nan() || budget < 1.0 {
        return 0;
    }
    let l = budget.ln() + 1.0;
    let v = (E - 1.0) * budget / (2.0 * arity as f64 * E * l * l);
    v.floor() as u64
}

/// `⌊ln Λ̃⌋`, the highest fidelity level used; `None` when `Λ̃ = 0`.
pub fn max_level(lambda_tilde: u64) -> Option<u32> {
    (lambda_tilde >= 1).then(|| level_for(lambda_tilde as f64))
}

/// The `(h, m, j)` triples of the exploration loop, in loop order.
pub fn exploration_schedule(lambda_tilde: u64) -> impl Iterator<Item = (u64, u64, u32)> {
    (1..=lambda_tilde).flat_map(move |h| {
        (1..=lambda_tilde / h).map(move |m| (h, m, level_for(lambda_tilde as f64 / (h * m) as f64)))
    })
}

/// `Σ_{u ≤ j} e^u`, the worst-case cost of enabling one child at levels `0..=j`.
pub fn cumulative_level_cost(j: u32) -> f64 {
    (0..=j).map(level_cost).sum()
}

/// Worst-case spend of a run with effective budget `Λ̃`: every enabled value
/// fetched, at most `K^h` openings at depth `h`, the root opened at level
/// `⌊ln Λ̃⌋`, and one cross-validation evaluation at cost `Λ̃` per level.
/// With `parent_reuse` and odd `K`, the middle child shares its parent's
/// representative and is not charged again.
pub fn predicted_spend(lambda_tilde: u64, arity: usize, parent_reuse: bool) -> f64 {
    let Some(j_max) = max_level(lambda_tilde) else {
        return 0.0;
    };
    let table: Vec<f64> = (0..=j_max).map(cumulative_level_cost).collect();
    let k = arity as f64;
    let fresh = if parent_reuse && arity % 2 == 1 {
        k - 1.0
    } else {
        k
    };

    let mut total = k * table[j_max as usize];
    let mut width: u128 = 1;
    for h in 1..=lambda_tilde {
        width = width.saturating_mul(arity as u128);
        let count = (lambda_tilde / h).min(width.min(u64::MAX as u128) as u64);
        for m in 1..=count {
            let j = level_for(lambda_tilde as f64 / (h * m) as f64);
            total += fresh * table[j as usize];
        }
    }
    total + (j_max as f64 + 1.0) * lambda_tilde as f64
}

/// Largest `Λ̃` whose [`predicted_spend`] fits in `budget`, found by bisection.
pub fn optimize_effective_budget(budget: f64, arity: usize, parent_reuse: bool) -> u64 {
    let fits = |lt: u64| predicted_spend(lt, arity, parent_reuse) <= budget;
    let mut lo = effective_budget(budget, arity);
    while lo > 0 && !fits(lo) {
        lo /= 2;
    }
    let mut hi = lo.max(1);
    while fits(hi) {
        lo = hi;
        hi = hi.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
