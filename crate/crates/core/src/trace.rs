use serde::{Deserialize, Serialize};

use crate::partition::CellId;

/// What a single optimizer run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub output: Vec<f64>,
    pub output_cell: CellId,
    pub budget: f64,
    pub spent: f64,
    pub regret: f64,
    pub evaluations: usize,
}
