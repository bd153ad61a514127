//! Closed-form regret bounds as pure functions.

mod lambert;
mod lower;
mod rates;
mod upper;

pub use lambert::{lambert_w, lambert_w_lower};
pub use lower::{
    lemma6_bound, polynomial_width_constant, theorem1_lower, LowerBound, LowerVariant,
};
pub use rates::{corollary4_rate, rate_tag, Rate, RateTag};
pub use upper::{
    exp_decay_threshold, fixed_point_residual, lemma7_bound, lemma7_conditions, lemma7_max_depth,
    theorem3_bound, Regime, UpperBound,
};
