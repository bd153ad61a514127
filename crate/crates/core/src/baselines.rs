//! Single-fidelity tree searches that only ever query the top fidelity.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fidelity::Environment;
use crate::partition::{CellId, Partition, PartitionTree};
use crate::trace::RegretTrace;

/// How many cells a baseline opens at each depth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OpeningSchedule {
    /// `⌊h_max/h⌋` cells with `h_max = ⌊n / H_n⌋`, `H_n` the harmonic number.
    SequOOL { n: u64 },
    /// `⌊2√(n/h)⌋` cells up to depth `n`.
    ModifiedSqrt { n: u64 },
    /// `⌊n/(h ln²(n/h))⌋` cells up to depth `⌊n/e²⌋`.
    ModifiedLog { n: u64 },
}

fn harmonic(n: u64) -> f64 {
    (1..=n).map(|i| 1.0 / i as f64).sum()
}

impl OpeningSchedule {
    pub fn param(self) -> u64 {
        match self {
            OpeningSchedule::SequOOL { n }
            | OpeningSchedule::ModifiedSqrt { n }
            | OpeningSchedule::ModifiedLog { n } => n,
        }
    }

    pub fn with_param(self, n: u64) -> Self {
        match self {
            OpeningSchedule::SequOOL { .. } => OpeningSchedule::SequOOL { n },
            OpeningSchedule::ModifiedSqrt { .. } => OpeningSchedule::ModifiedSqrt { n },
            OpeningSchedule::ModifiedLog { .. } => OpeningSchedule::ModifiedLog { n },
        }
    }

    /// Deepest depth with a non-zero count.
    pub fn max_depth(self) -> u64 {
        match self {
            OpeningSchedule::SequOOL { n: 0 } => 0,
            OpeningSchedule::SequOOL { n } => (n as f64 / harmonic(n)).floor() as u64,
            OpeningSchedule::ModifiedSqrt { n } => n,
            OpeningSchedule::ModifiedLog { n } => {
                (n as f64 / std::f64::consts::E.powi(2)).floor() as u64
            }
        }
    }

    pub fn count(self, h: u64) -> u64 {
        if h == 0 || h > self.max_depth() {
            return 0;
        }
        let hf = h as f64;
        match self {
            OpeningSchedule::SequOOL { .. } => self.max_depth() / h,
            OpeningSchedule::ModifiedSqrt { n } => (2.0 * (n as f64 / hf).sqrt()).floor() as u64,
            OpeningSchedule::ModifiedLog { n } => {
                let l = (n as f64 / hf).ln();
                if l <= 0.0 {
                    0
                } else {
                    (n as f64 / (hf * l * l)).floor() as u64
                }
            }
        }
    }

    /// `count(h)` capped by the `K^h` cells that exist at depth `h`.
    pub fn capped_count(self, h: u64, arity: usize) -> u64 {
        let width = u32::try_from(h)
            .ok()
            .and_then(|h| (arity as u64).checked_pow(h))
            .unwrap_or(u64::MAX);
        self.count(h).min(width)
    }

    /// Evaluations spent by the root plus every scheduled opening.
    pub fn evaluations(self, arity: usize) -> u64 {
        let openings: u64 = (1..=self.max_depth())
            .map(|h| self.capped_count(h, arity))
            .fold(0u64, u64::saturating_add);
        (arity as u64).saturating_mul(openings.saturating_add(1))
    }

    /// The same schedule with the largest parameter whose evaluations fit in
    /// `n`, found by bisection.
    pub fn fitted(self, n: u64, arity: usize) -> Self {
        let fits = |s: u64| self.with_param(s).evaluations(arity) <= n;
        let (mut lo, mut hi) = (0u64, n.max(1));
        if fits(hi) {
            return self.with_param(hi);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if fits(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.with_param(lo)
    }
}

#[derive(Debug, Clone)]
pub struct BaselineRun {
    pub trace: RegretTrace,
    /// Evaluation count `n = ⌊Λ/λ(1)⌋`.
    pub evaluation_budget: u64,
    /// The schedule actually followed.
    pub schedule: OpeningSchedule,
    /// Cells opened per depth, starting at depth 0.
    pub opened_per_depth: Vec<u64>,
}

impl BaselineRun {
    pub fn deepest_opened(&self) -> Option<u32> {
        self.opened_per_depth
            .iter()
            .rposition(|&c| c > 0)
            .map(|d| d as u32)
    }
}

struct Search<'e> {
    env: &'e mut Environment,
    tree: PartitionTree,
    cost: f64,
    evaluations: usize,
}

impl Search<'_> {
    fn value(&mut self, id: CellId) -> Result<f64> {
        if let Some(v) = self.tree.value(id, 0) {
            return Ok(v);
        }
        let point = self.tree.cell(id)?.representative.clone();
        let v = self.env.evaluate_at_cost(&point, self.cost)?;
        self.evaluations += 1;
        self.tree.enable(id, 0);
        self.tree.record_value(id, 0, v);
        Ok(v)
    }

    /// Evaluates every child of `id`; returns them or `None` when the cell
    /// cannot be split or the children are unaffordable.
    fn open(&mut self, id: CellId) -> Result<Option<Vec<CellId>>> {
        let Some(children) = self.tree.children(id)? else {
            return Ok(None);
        };
        let fresh = children
            .iter()
            .filter(|&&c| self.tree.value(c, 0).is_none())
            .count();
        if !self
            .env
            .affords_costs(std::iter::repeat_n(self.cost, fresh))
        {
            return Ok(None);
        }
        for &c in &children {
            self.value(c)?;
        }
        self.tree.mark_opened(id, 0);
        Ok(Some(children))
    }

    fn best(&self, cells: &[CellId]) -> Option<CellId> {
        let mut best: Option<(f64, CellId)> = None;
        for &c in cells {
            let Some(v) = self.tree.value(c, 0) else {
                continue;
            };
            let replace = match best {
                None => true,
                Some((bv, bc)) => v > bv || (v == bv && c < bc),
            };
            if replace {
                best = Some((v, c));
            }
        }
        best.map(|(_, c)| c)
    }
}

/// Runs `schedule` at the top fidelity under the environment's budget.
///
/// The schedule parameter is refitted so the whole schedule costs at most
/// `n = ⌊Λ/λ(1)⌋` evaluations.
pub fn run_baseline(
    schedule: OpeningSchedule,
    arity: usize,
    env: &mut Environment,
) -> Result<BaselineRun> {
    let Some(top) = env.schedule().scale.top_cost() else {
        return Err(Error::Inapplicable(
            "the top fidelity has infinite cost".to_string(),
        ));
    };
    let n = (env.budget() / top).floor() as u64;
    let schedule = schedule.fitted(n, arity);
    let partition = Partition::new(env.domain().clone(), arity)?;
    let mut search = Search {
        env,
        tree: PartitionTree::new(partition),
        cost: top,
        evaluations: 0,
    };

    let mut opened_per_depth = vec![1u64];
    let root_children = search
        .tree
        .children(CellId::ROOT)?
        .ok_or_else(|| Error::domain("the domain cannot be split"))?;
    let mut frontier: Vec<CellId> = Vec::new();
    for &c in &root_children {
        if !search.env.affords_costs([top]) {
            break;
        }
        search.value(c)?;
        frontier.push(c);
    }
    search.tree.mark_opened(CellId::ROOT, 0);
    let mut deepest_children = frontier.clone();

    for h in 1..=schedule.max_depth() {
        let count = schedule.capped_count(h, arity);
        let mut ranked: BTreeSet<(std::cmp::Reverse<OrdF64>, u128)> = frontier
            .iter()
            .filter_map(|&c| {
                search
                    .tree
                    .value(c, 0)
                    .map(|v| (std::cmp::Reverse(OrdF64(v)), c.index))
            })
            .collect();
        let depth = h as u32;
        let mut next = Vec::new();
        let mut opened = 0;
        while opened < count {
            let Some((_, index)) = ranked.pop_first() else {
                break;
            };
            if let Some(children) = search.open(CellId::new(depth, index))? {
                next.extend(children);
                opened += 1;
            }
        }
        if opened == 0 {
            break;
        }
        opened_per_depth.push(opened);
        deepest_children = next.clone();
        frontier = next;
    }

    let output_cell = search.best(&deepest_children).unwrap_or(CellId::ROOT);
    let output = search.tree.cell(output_cell)?.representative.clone();
    let trace = RegretTrace {
        regret: search.env.regret(&output),
        output,
        output_cell,
        budget: search.env.budget(),
        spent: search.env.spent(),
        evaluations: search.evaluations,
    };
    Ok(BaselineRun {
        trace,
        evaluation_budget: n,
        schedule,
        opened_per_depth,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
