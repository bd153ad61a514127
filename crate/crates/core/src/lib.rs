//! Adaptive multi-fidelity optimization of deterministic black-box functions
//! over hierarchical partitions.
//!
//! The optimizer ([`kometo::run`]) explores a `K`-ary partition of a box,
//! choosing per depth how expensive each observation should be, and spends
//! at most the given budget. Closed-form regret bounds live in [`theory`],
//! adversarial and benchmark targets in [`instances`], single-fidelity
//! comparison searches in [`baselines`], and the sweep runner in [`harness`].

pub mod baselines;
pub mod error;
pub mod exec;
pub mod fidelity;
pub mod harness;
pub mod instances;
pub mod kometo;
pub mod partition;
pub mod theory;
mod trace;

pub use error::{Error, Result};
pub use trace::RegretTrace;
