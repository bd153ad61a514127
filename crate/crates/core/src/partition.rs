//! K-ary hierarchical partitioning of a box domain.
//!
//! A cell at depth `h` is split into `K` equal slabs along dimension `h mod D`.
//! Cells are addressed by [`CellId`]; the children of `(h, i)` are
//! `(h + 1, K·i + l)` for `l` in `0..K`, ordered by ascending coordinate.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An axis-aligned box `[lo_0, hi_0] × … × [lo_{D-1}, hi_{D-1}]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BoundsRepr", into = "BoundsRepr")]
pub struct Bounds {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct BoundsRepr {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TryFrom<BoundsRepr> for Bounds {
    type Error = Error;
    fn try_from(r: BoundsRepr) -> Result<Self> {
        Bounds::new(r.lower, r.upper)
    }
}

impl From<Bounds> for BoundsRepr {
    fn from(b: Bounds) -> Self {
        BoundsRepr {
            lower: b.lower,
            upper: b.upper,
        }
    }
}

impl Bounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::domain("a box needs at least one dimension"));
        }
        if lower.len() != upper.len() {
            return Err(Error::domain(format!(
                "lower has {} coordinates but upper has {}",
                lower.len(),
                upper.len()
            )));
        }
        for (k, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::domain(format!(
                    "dimension {k}: need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Bounds { lower, upper })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Bounds::new(
            pairs.iter().map(|p| p.0).collect(),
            pairs.iter().map(|p| p.1).collect(),
        )
    }

    /// The unit cube `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        assert!(dim >= 1, "a box needs at least one dimension");
        Bounds {
            lower: vec![0.0; dim],
            upper: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| lo + (hi - lo) / 2.0)
            .collect()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }
}

/// Address of a cell: depth `h` and index `i ∈ [0, K^h)`.
///
/// The derived ordering is by depth, then index, which is the tie-break order
/// every optimizer in this crate uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub depth: u32,
    pub index: u128,
}

impl CellId {
    pub const ROOT: CellId = CellId { depth: 0, index: 0 };

    pub fn new(depth: u32, index: u128) -> Self {
        CellId { depth, index }
    }

    /// Child `l` under arity `k`. Panics on index overflow, which the
    /// [`Partition`] depth cap rules out for cells it hands out.
    pub fn child(self, l: usize, k: usize) -> CellId {
        let index = self
            .index
            .checked_mul(k as u128)
            .and_then(|v| v.checked_add(l as u128))
            .expect("cell index overflow");
        CellId {
            depth: self.depth + 1,
            index,
        }
    }

    pub fn parent(self, k: usize) -> Option<CellId> {
        (self.depth > 0).then(|| CellId {
            depth: self.depth - 1,
            index: self.index / k as u128,
        })
    }

    /// Position of this cell among its siblings.
    pub fn slot(self, k: usize) -> usize {
        (self.index % k as u128) as usize
    }

    /// The ancestor at `depth` (itself when depths match).
    pub fn ancestor(self, depth: u32, k: usize) -> Option<CellId> {
        if depth > self.depth {
            return None;
        }
        let mut index = self.index;
        for _ in depth..self.depth {
            index /= k as u128;
        }
        Some(CellId { depth, index })
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.depth, self.index)
    }
}

/// Where [`Partition::descend_while`] stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Descent {
    /// Deepest cell entered.
    pub last: CellId,
    /// True when the walk ended because `last` cannot be split.
    pub resolution_limited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub id: CellId,
    pub bounds: Bounds,
    pub representative: Vec<f64>,
}

/// Sub-interval `l` of `K` equal pieces of `[lo, hi]`.
///
/// The outer endpoints are copied verbatim so that children tile the parent
/// exactly in floating point, and the split points are the same whether the
/// interval is reached by splitting or by descending towards a point.
pub(crate) fn child_interval(lo: f64, hi: f64, l: usize, k: usize) -> (f64, f64) {
    let width = hi - lo;
    let a = if l == 0 {
        lo
    } else {
        lo + width * l as f64 / k as f64
    };
    let b = if l + 1 == k {
        hi
    } else {
        lo + width * (l + 1) as f64 / k as f64
    };
    (a, b)
}

/// Geometry of the hierarchical partition: domain, arity and the deepest
/// addressable depth.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    domain: Bounds,
    arity: usize,
    max_depth: u32,
}

impl Partition {
    pub fn new(domain: Bounds, arity: usize) -> Result<Self> {
        if arity < 2 {
            return Err(Error::param(format!(
                "arity must be at least 2, got {arity}"
            )));
        }
        let mut max_depth = 0u32;
        let mut span: u128 = 1;
        while let Some(next) = span.checked_mul(arity as u128) {
            span = next;
            max_depth += 1;
        }
        Ok(Partition {
            domain,
            arity,
            max_depth,
        })
    }

    pub fn binary(domain: Bounds) -> Self {
        Partition::new(domain, 2).expect("arity 2 is valid")
    }

    pub fn domain(&self) -> &Bounds {
        &self.domain
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Deepest depth whose indices fit in a `u128`.
    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn split_dim(&self, depth: u32) -> usize {
        depth as usize % self.dim()
    }

    pub fn root(&self) -> Cell {
        Cell {
            id: CellId::ROOT,
            representative: self.domain.midpoint(),
            bounds: self.domain.clone(),
        }
    }

    /// Whether `cell` can be split into `K` children that each still have a
    /// strictly interior midpoint in double precision, and whose indices fit.
    pub fn is_splittable(&self, cell: &Cell) -> bool {
        if cell.id.depth >= self.max_depth {
            return false;
        }
        let dim = self.split_dim(cell.id.depth);
        let (lo, hi) = (cell.bounds.lower[dim], cell.bounds.upper[dim]);
        (0..self.arity).all(|l| {
            let (a, b) = child_interval(lo, hi, l, self.arity);
            let mid = a + (b - a) / 2.0;
            a < mid && mid < b
        })
    }

    /// The `K` children of `cell`, or `None` when the cell cannot be split.
    pub fn split(&self, cell: &Cell) -> Option<Vec<Cell>> {
        if !self.is_splittable(cell) {
            return None;
        }
        let dim = self.split_dim(cell.id.depth);
        let (lo, hi) = (cell.bounds.lower[dim], cell.bounds.upper[dim]);
        Some(
            (0..self.arity)
                .map(|l| {
                    let (a, b) = child_interval(lo, hi, l, self.arity);
                    let mut bounds = cell.bounds.clone();
                    bounds.lower[dim] = a;
                    bounds.upper[dim] = b;
                    Cell {
                        id: cell.id.child(l, self.arity),
                        representative: bounds.midpoint(),
                        bounds,
                    }
                })
                .collect(),
        )
    }

    /// Builds the cell with address `id` by descending from the root.
    pub fn cell(&self, id: CellId) -> Result<Cell> {
        if id.depth > self.max_depth {
            return Err(Error::domain(format!(
                "depth {} exceeds the addressable depth {}",
                id.depth, self.max_depth
            )));
        }
        let mut cell = self.root();
        for depth in 0..id.depth {
            let anc = id.ancestor(depth + 1, self.arity).expect("depth in range");
            let slot = anc.slot(self.arity);
            let mut children = self.split(&cell).ok_or_else(|| {
                Error::domain(format!("cell {} cannot be split further", cell.id))
            })?;
            cell = children.swap_remove(slot);
        }
        Ok(cell)
    }

    /// The depth-`h` cell whose bounds contain `x`; points on a shared face
    /// go to the lower-index cell.
    pub fn cell_containing(&self, x: &[f64], h: u32) -> Result<Cell> {
        if !self.domain.contains(x) {
            return Err(Error::domain(format!(
                "point {x:?} lies outside the domain"
            )));
        }
        let mut cell = self.root();
        for _ in 0..h {
            let children = self.split(&cell).ok_or_else(|| {
                Error::domain(format!("cell {} cannot be split further", cell.id))
            })?;
            let dim = self.split_dim(cell.id.depth);
            cell = children
                .into_iter()
                .find(|c| x[dim] <= c.bounds.upper[dim])
                .expect("the last child reaches the parent's upper bound");
        }
        Ok(cell)
    }

    /// Descends from the root towards `x`, entering each child for which
    /// `keep` returns true. Stops at the first rejected child or when the
    /// current cell cannot be split.
    pub fn descend_while(&self, x: &[f64], mut keep: impl FnMut(CellId) -> bool) -> Descent {
        let mut lower = self.domain.lower.clone();
        let mut upper = self.domain.upper.clone();
        let mut id = CellId::ROOT;
        loop {
            let dim = self.split_dim(id.depth);
            let (lo, hi) = (lower[dim], upper[dim]);
            let splittable = id.depth < self.max_depth
                && (0..self.arity).all(|l| {
                    let (a, b) = child_interval(lo, hi, l, self.arity);
                    let mid = a + (b - a) / 2.0;
                    a < mid && mid < b
                });
            if !splittable {
                return Descent {
                    last: id,
                    resolution_limited: true,
                };
            }
            let l = (0..self.arity)
                .find(|&l| x[dim] <= child_interval(lo, hi, l, self.arity).1)
                .unwrap_or(self.arity - 1);
            let child = id.child(l, self.arity);
            if !keep(child) {
                return Descent {
                    last: id,
                    resolution_limited: false,
                };
            }
            let (a, b) = child_interval(lo, hi, l, self.arity);
            lower[dim] = a;
            upper[dim] = b;
            id = child;
        }
    }
}

/// Lazily materialized cells plus the per-level evaluation bookkeeping shared
/// by the optimizers.
///
/// Evaluability is stored as the highest level at which a cell was made
/// requestable: since opening at level `j` enables every `u ≤ j`, the flag
/// `T(h, i, u)` holds exactly when `u` is at most that level.
#[derive(Debug, Clone)]
pub struct PartitionTree {
    partition: Partition,
    cells: HashMap<CellId, Cell>,
    evaluable: HashMap<CellId, u32>,
    values: HashMap<(CellId, u32), f64>,
    opened: HashMap<CellId, u32>,
}

impl PartitionTree {
    pub fn new(partition: Partition) -> Self {
        let mut cells = HashMap::new();
        let root = partition.root();
        cells.insert(root.id, root);
        PartitionTree {
            partition,
            cells,
            evaluable: HashMap::new(),
            values: HashMap::new(),
            opened: HashMap::new(),
        }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn arity(&self) -> usize {
        self.partition.arity
    }

    /// Returns the cell, materializing it and any missing ancestors.
    pub fn cell(&mut self, id: CellId) -> Result<&Cell> {
        if !self.cells.contains_key(&id) {
            let parent_id = id
                .parent(self.partition.arity)
                .expect("the root is always materialized");
            let parent = self.cell(parent_id)?.clone();
            let children = self.partition.split(&parent).ok_or_else(|| {
                Error::domain(format!("cell {parent_id} cannot be split further"))
            })?;
            for c in children {
                self.cells.insert(c.id, c);
            }
        }
        Ok(&self.cells[&id])
    }

    pub fn cached(&self, id: CellId) -> Option<&Cell> {
        self.cells.get(&id)
    }

    pub fn materialized(&self) -> usize {
        self.cells.len()
    }

    /// Materializes and returns the children of `id`, or `None` if the cell is
    /// too small to split.
    pub fn children(&mut self, id: CellId) -> Result<Option<Vec<CellId>>> {
        let cell = self.cell(id)?.clone();
        match self.partition.split(&cell) {
            None => Ok(None),
            Some(children) => {
                let ids = children.iter().map(|c| c.id).collect();
                for c in children {
                    self.cells.entry(c.id).or_insert(c);
                }
                Ok(Some(ids))
            }
        }
    }

    /// Records that `id` was opened at `level`; returns the previous opening
    /// level, if any. The stored level only ever grows.
    pub fn mark_opened(&mut self, id: CellId, level: u32) -> Option<u32> {
        let prev = self.opened.get(&id).copied();
        if prev.is_none_or(|p| level > p) {
            self.opened.insert(id, level);
        }
        prev
    }

    pub fn opened_level(&self, id: CellId) -> Option<u32> {
        self.opened.get(&id).copied()
    }

    pub fn is_opened(&self, id: CellId) -> bool {
        self.opened.contains_key(&id)
    }

    pub fn opened_cells(&self) -> impl Iterator<Item = (CellId, u32)> + '_ {
        self.opened.iter().map(|(&id, &j)| (id, j))
    }

    /// Enables levels `0..=level` for `id`. Returns the levels newly enabled.
    pub fn enable(&mut self, id: CellId, level: u32) -> std::ops::RangeInclusive<u32> {
        match self.evaluable.get(&id).copied() {
            Some(prev) if prev >= level => level + 1..=level,
            Some(prev) => {
                self.evaluable.insert(id, level);
                prev + 1..=level
            }
            None => {
                self.evaluable.insert(id, level);
                0..=level
            }
        }
    }

    /// `T(h, i, j)`.
    pub fn is_evaluable(&self, id: CellId, level: u32) -> bool {
        self.evaluable.get(&id).is_some_and(|&top| level <= top)
    }

    pub fn evaluable_cells(&self) -> impl Iterator<Item = (CellId, u32)> + '_ {
        self.evaluable.iter().map(|(&id, &j)| (id, j))
    }

    pub fn value(&self, id: CellId, level: u32) -> Option<f64> {
        self.values.get(&(id, level)).copied()
    }

    pub fn record_value(&mut self, id: CellId, level: u32, value: f64) {
        debug_assert!(self.is_evaluable(id, level));
        self.values.insert((id, level), value);
    }

    pub fn recorded_values(&self) -> usize {
        self.values.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_line() -> Partition {
        Partition::binary(Bounds::unit(1))
    }

    #[test]
    fn bisects_the_unit_interval() {
        let p = unit_line();
        let kids = p.split(&p.root()).unwrap();
        assert_eq!(kids[0].bounds, Bounds::new(vec![0.0], vec![0.5]).unwrap());
        assert_eq!(kids[1].bounds, Bounds::new(vec![0.5], vec![1.0]).unwrap());
        assert!(kids.iter().all(|c| c.id.depth == 1));
    }

    #[test]
    fn cycles_split_dimension_with_depth() {
        let p = Partition::binary(Bounds::unit(2));
        let kids = p.split(&p.root()).unwrap();
        assert_eq!(
            kids[0].bounds,
            Bounds::from_pairs(&[(0.0, 0.5), (0.0, 1.0)]).unwrap()
        );
        let grand = p.split(&kids[1]).unwrap();
        assert_eq!(
            grand[0].bounds,
            Bounds::from_pairs(&[(0.5, 1.0), (0.0, 0.5)]).unwrap()
        );
        assert_eq!(
            grand[1].bounds,
            Bounds::from_pairs(&[(0.5, 1.0), (0.5, 1.0)]).unwrap()
        );
    }

    #[test]
    fn child_indices_follow_k_i_plus_l() {
        let id = CellId::new(2, 3);
        assert_eq!(id.child(0, 2), CellId::new(3, 6));
        assert_eq!(id.child(1, 2), CellId::new(3, 7));
        assert_eq!(CellId::new(3, 7).parent(2), Some(id));
        assert_eq!(CellId::new(5, 44).ancestor(2, 3), Some(CellId::new(2, 1)));
    }

    #[test]
    fn representatives_are_midpoints() {
        let p = Partition::binary(Bounds::from_pairs(&[(-5.0, 10.0), (0.0, 15.0)]).unwrap());
        assert_eq!(p.root().representative, vec![2.5, 7.5]);
        let c = Bounds::from_pairs(&[(0.0, 1.0), (0.5, 1.0)]).unwrap();
        assert_eq!(c.midpoint(), vec![0.5, 0.75]);
        let line = unit_line();
        assert_eq!(
            line.cell(CellId::new(1, 0)).unwrap().representative,
            vec![0.25]
        );
    }

    #[test]
    fn cell_containing_descends_and_breaks_ties_low() {
        let p = unit_line();
        assert_eq!(p.cell_containing(&[0.3], 2).unwrap().id, CellId::new(2, 1));
        assert_eq!(p.cell_containing(&[0.5], 1).unwrap().id, CellId::new(1, 0));
        assert_eq!(p.cell_containing(&[0.99], 3).unwrap().id, CellId::new(3, 7));
        assert!(matches!(
            p.cell_containing(&[1.5], 1),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ternary_split_is_equal_thirds() {
        let p = Partition::new(Bounds::unit(1), 3).unwrap();
        let kids = p.split(&p.root()).unwrap();
        assert_eq!(kids.len(), 3);
        assert_eq!(kids[0].bounds.upper(), kids[1].bounds.lower());
        assert_eq!(kids[1].bounds.upper(), kids[2].bounds.lower());
        assert_eq!(kids[2].bounds.upper(), &[1.0]);
        assert_eq!(kids[1].representative, p.root().representative);
    }

    #[test]
    fn depth_is_capped_by_precision_and_index_width() {
        let p = unit_line();
        assert_eq!(p.max_depth(), 127);
        let mut cell = p.root();
        let mut depth = 0;
        while let Some(mut kids) = p.split(&cell) {
            cell = kids.swap_remove(0);
            depth += 1;
        }
        assert!(depth > 50 && depth <= 127, "stopped at {depth}");
    }

    #[test]
    fn tree_enables_levels_monotonically() {
        let mut t = PartitionTree::new(unit_line());
        let id = CellId::new(1, 1);
        assert_eq!(t.enable(id, 1), 0..=1);
        assert!(t.enable(id, 0).is_empty());
        assert_eq!(t.enable(id, 3), 2..=3);
        assert!(t.is_evaluable(id, 2));
        assert!(!t.is_evaluable(id, 4));
        assert_eq!(t.mark_opened(id, 2), None);
        assert_eq!(t.mark_opened(id, 1), Some(2));
        assert_eq!(t.opened_level(id), Some(2));
        assert_eq!(
            t.cell(CellId::new(3, 5)).unwrap().representative,
            vec![0.6875]
        );
    }
}
