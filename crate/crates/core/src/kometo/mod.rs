//! The adaptive multi-fidelity optimizer.
//!
//! A run preprocesses the budget into an effective budget `Λ̃`, opens the
//! root at the highest fidelity level, then for every depth `h` opens
//! `⌊Λ̃/h⌋` cells at decreasing fidelity levels `⌊ln(Λ̃/(h·m))⌋`. Finally one
//! candidate per level is re-evaluated at cost `Λ̃` and the best is output.

mod budget;

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

pub use budget::{
    cumulative_level_cost, effective_budget, exploration_schedule, level_cost, level_for,
    max_level, optimize_effective_budget, predicted_spend,
};

use crate::error::{Error, Result};
use crate::fidelity::Environment;
use crate::partition::{CellId, Partition, PartitionTree};
use crate::trace::RegretTrace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KometoConfig {
    pub arity: usize,
    /// Enlarge `Λ̃` to the largest value whose worst-case spend fits.
    pub budget_optimization: bool,
    /// Fetch child values only when a selection or the final comparison
    /// reads them.
    pub lazy_child_evaluation: bool,
    /// Reuse a parent's value for the child sharing its representative.
    pub parent_reuse: bool,
}

impl Default for KometoConfig {
    fn default() -> Self {
        KometoConfig {
            arity: 2,
            budget_optimization: false,
            lazy_child_evaluation: true,
            parent_reuse: true,
        }
    }
}

/// Depth-`h` cells in decreasing value order, ties by index.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Ranked {
    value: f64,
    index: u128,
}

impl Eq for Ranked {}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        other
            .value
            .total_cmp(&self.value)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Unopened cells of one depth that are requestable at one level.
#[derive(Debug, Default, Clone)]
struct Slot {
    pending: BTreeSet<u128>,
    ranked: BTreeSet<Ranked>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    NoCandidate,
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Skip {
    pub h: u64,
    pub m: u64,
    pub level: u32,
    pub reason: SkipReason,
}

/// A cross-validation candidate and its score at cost `Λ̃`, if it could be
/// afforded.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Candidate {
    pub level: u32,
    pub cell: CellId,
    pub point: Vec<f64>,
    pub score: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct KometoRun {
    pub trace: RegretTrace,
    pub lambda_tilde: u64,
    pub max_level: Option<u32>,
    /// Opened cells with their opening level, in order; the root comes first.
    pub openings: Vec<(CellId, u32)>,
    pub skips: Vec<Skip>,
    pub candidates: Vec<Candidate>,
    pub output_level: Option<u32>,
    pub tree: PartitionTree,
}

impl KometoRun {
    pub fn budget_skips(&self) -> usize {
        self.skips
            .iter()
            .filter(|s| s.reason == SkipReason::Budget)
            .count()
    }
}

fn point_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

/// Optimizer state for one run against one environment.
pub struct Kometo<'e> {
    config: KometoConfig,
    env: &'e mut Environment,
    tree: PartitionTree,
    lambda_tilde: u64,
    slots: HashMap<(u32, u32), Slot>,
    best_at_level: Vec<Option<(f64, CellId)>>,
    memo: HashMap<(Vec<u64>, u32), f64>,
    terminal: BTreeSet<CellId>,
    openings: Vec<(CellId, u32)>,
    skips: Vec<Skip>,
    evaluations: usize,
}

impl<'e> Kometo<'e> {
    pub fn new(config: KometoConfig, env: &'e mut Environment) -> Result<Self> {
        let partition = Partition::new(env.domain().clone(), config.arity)?;
        let budget = env.budget();
        let lambda_tilde = if config.budget_optimization {
            optimize_effective_budget(budget, config.arity, config.parent_reuse)
        } else {
            effective_budget(budget, config.arity)
        };
        let levels = max_level(lambda_tilde).map_or(0, |j| j as usize + 1);
        Ok(Kometo {
            config,
            env,
            tree: PartitionTree::new(partition),
            lambda_tilde,
            slots: HashMap::new(),
            best_at_level: vec![None; levels],
            memo: HashMap::new(),
            terminal: BTreeSet::new(),
            openings: Vec::new(),
            skips: Vec::new(),
            evaluations: 0,
        })
    }

    pub fn lambda_tilde(&self) -> u64 {
        self.lambda_tilde
    }

    pub fn tree(&self) -> &PartitionTree {
        &self.tree
    }

    fn slot(&mut self, depth: u32, level: u32) -> &mut Slot {
        self.slots.entry((depth, level)).or_default()
    }

    fn memo_hit(&self, id: CellId, level: u32) -> bool {
        self.config.parent_reuse
            && self.tree.cached(id).is_some_and(|c| {
                self.memo
                    .contains_key(&(point_key(&c.representative), level))
            })
    }

    /// Costs that fetching the given unevaluated values would incur.
    fn pending_costs(&mut self, ids: &[(CellId, u32)]) -> Result<Vec<f64>> {
        let mut costs = Vec::new();
        for &(id, level) in ids {
            self.tree.cell(id)?;
            if self.tree.value(id, level).is_none() && !self.memo_hit(id, level) {
                costs.push(level_cost(level));
            }
        }
        Ok(costs)
    }

    fn fetch(&mut self, id: CellId, level: u32) -> Result<f64> {
        if let Some(v) = self.tree.value(id, level) {
            return Ok(v);
        }
        let point = self.tree.cell(id)?.representative.clone();
        let key = (point_key(&point), level);
        let value = match self.memo.get(&key) {
            Some(&v) if self.config.parent_reuse => v,
            _ => {
                let v = self.env.evaluate_at_cost(&point, level_cost(level))?;
                self.evaluations += 1;
                self.memo.insert(key, v);
                v
            }
        };
        self.tree.record_value(id, level, value);
        let best = &mut self.best_at_level[level as usize];
        let better = match *best {
            None => true,
            Some((bv, bid)) => match value.total_cmp(&bv) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Equal => id < bid,
                std::cmp::Ordering::Less => false,
            },
        };
        if better {
            *best = Some((value, id));
        }
        Ok(value)
    }

    /// Makes the children of `id` requestable at every level up to `level`.
    /// Returns `false` when nothing changed: the cell was already opened at
    /// `level` or higher, cannot be split, or (eagerly) the new child values
    /// could not be afforded.
    pub fn open_cell(&mut self, id: CellId, level: u32) -> Result<bool> {
        if self.tree.opened_level(id).is_some_and(|prev| prev >= level) {
            return Ok(false);
        }
        let Some(children) = self.tree.children(id)? else {
            self.terminal.insert(id);
            return Ok(false);
        };
        let from = self.tree.opened_level(id).map_or(0, |p| p + 1);
        if !self.config.lazy_child_evaluation {
            let wanted: Vec<(CellId, u32)> = children
                .iter()
                .flat_map(|&c| (from..=level).map(move |u| (c, u)))
                .collect();
            let costs = self.pending_costs(&wanted)?;
            if !self.env.affords_costs(costs) {
                return Ok(false);
            }
        }
        self.mark_opened(id, level);
        for &child in &children {
            let new_levels = self.tree.enable(child, level);
            for u in new_levels {
                if self.config.lazy_child_evaluation {
                    self.slot(child.depth, u).pending.insert(child.index);
                } else {
                    let value = self.fetch(child, u)?;
                    self.slot(child.depth, u).ranked.insert(Ranked {
                        value,
                        index: child.index,
                    });
                }
            }
        }
        Ok(true)
    }

    fn mark_opened(&mut self, id: CellId, level: u32) {
        self.tree.mark_opened(id, level);
        self.openings.push((id, level));
        self.retire(id);
    }

    /// Drops `id` from every selection structure of its depth.
    fn retire(&mut self, id: CellId) {
        let top = (0..self.best_at_level.len() as u32)
            .rev()
            .find(|&u| self.tree.is_evaluable(id, u));
        let Some(top) = top else { return };
        for u in 0..=top {
            let value = self.tree.value(id, u);
            if let Some(slot) = self.slots.get_mut(&(id.depth, u)) {
                slot.pending.remove(&id.index);
                if let Some(v) = value {
                    slot.ranked.remove(&Ranked {
                        value: v,
                        index: id.index,
                    });
                }
            }
        }
    }

    /// Opens the best unopened depth-`h` cell requestable at `level`.
    pub fn select_and_open(
        &mut self,
        h: u32,
        level: u32,
    ) -> Result<std::result::Result<CellId, SkipReason>> {
        let pending: Vec<(CellId, u32)> = match self.slots.get(&(h, level)) {
            None => return Ok(Err(SkipReason::NoCandidate)),
            Some(slot) => slot
                .pending
                .iter()
                .map(|&i| (CellId::new(h, i), level))
                .collect(),
        };
        if !pending.is_empty() {
            let costs = self.pending_costs(&pending)?;
            if !self.env.affords_costs(costs) {
                return Ok(Err(SkipReason::Budget));
            }
            for &(id, u) in &pending {
                let value = self.fetch(id, u)?;
                let slot = self.slot(h, level);
                slot.pending.remove(&id.index);
                slot.ranked.insert(Ranked {
                    value,
                    index: id.index,
                });
            }
        }
        loop {
            let Some(best) = self
                .slots
                .get(&(h, level))
                .and_then(|s| s.ranked.first().copied())
            else {
                return Ok(Err(SkipReason::NoCandidate));
            };
            let id = CellId::new(h, best.index);
            if self.open_cell(id, level)? {
                return Ok(Ok(id));
            }
            if self.terminal.contains(&id) {
                self.retire(id);
                continue;
            }
            return Ok(Err(SkipReason::Budget));
        }
    }

    fn depth_is_empty(&self, h: u32) -> bool {
        (0..self.best_at_level.len() as u32).all(|u| {
            self.slots
                .get(&(h, u))
                .is_none_or(|s| s.pending.is_empty() && s.ranked.is_empty())
        })
    }

    fn explore(&mut self) -> Result<()> {
        let lt = self.lambda_tilde;
        for h in 1..=lt {
            let depth = u32::try_from(h).unwrap_or(u32::MAX);
            if self.depth_is_empty(depth) {
                for m in 1..=lt / h {
                    let level = level_for(lt as f64 / (h * m) as f64);
                    self.skips.push(Skip {
                        h,
                        m,
                        level,
                        reason: SkipReason::NoCandidate,
                    });
                }
                continue;
            }
            for m in 1..=lt / h {
                let level = level_for(lt as f64 / (h * m) as f64);
                if let Err(reason) = self.select_and_open(depth, level)? {
                    self.skips.push(Skip {
                        h,
                        m,
                        level,
                        reason,
                    });
                }
            }
        }
        Ok(())
    }

    fn cross_validate(&mut self) -> Result<(Vec<Candidate>, Option<usize>)> {
        let cost = self.lambda_tilde as f64;
        let mut scored: HashMap<Vec<u64>, Option<f64>> = HashMap::new();
        let mut candidates = Vec::new();
        for (level, best) in self.best_at_level.clone().into_iter().enumerate() {
            let Some((_, cell)) = best else { continue };
            let point = self.tree.cell(cell)?.representative.clone();
            let key = point_key(&point);
            let score = match scored.get(&key) {
                Some(&s) => s,
                None => {
                    let s = if self.env.affords_costs([cost]) {
                        self.evaluations += 1;
                        Some(self.env.evaluate_at_cost(&point, cost)?)
                    } else {
                        None
                    };
                    scored.insert(key, s);
                    s
                }
            };
            candidates.push(Candidate {
                level: level as u32,
                cell,
                point,
                score,
            });
        }
        let mut winner: Option<usize> = None;
        for (i, c) in candidates.iter().enumerate() {
            if let Some(s) = c.score {
                let better = match winner.and_then(|w| candidates[w].score) {
                    None => true,
                    Some(ws) => s.total_cmp(&ws) == std::cmp::Ordering::Greater,
                };
                if better {
                    winner = Some(i);
                }
            }
        }
        if winner.is_none() && !candidates.is_empty() {
            winner = Some(candidates.len() - 1);
        }
        Ok((candidates, winner))
    }

    /// Runs initialization, exploration and cross-validation.
    pub fn run(mut self) -> Result<KometoRun> {
        let j_max = max_level(self.lambda_tilde);
        let mut candidates = Vec::new();
        let mut winner = None;
        if let Some(j_max) = j_max {
            self.open_cell(CellId::ROOT, j_max)?;
            self.explore()?;
            let (c, w) = self.cross_validate()?;
            candidates = c;
            winner = w;
        }
        let (output_cell, output, output_level) = match winner {
            Some(i) => (
                candidates[i].cell,
                candidates[i].point.clone(),
                Some(candidates[i].level),
            ),
            None => {
                let root = self.tree.partition().root();
                (root.id, root.representative, None)
            }
        };
        let trace = RegretTrace {
            regret: self.env.regret(&output),
            output,
            output_cell,
            budget: self.env.budget(),
            spent: self.env.spent(),
            evaluations: self.evaluations,
        };
        Ok(KometoRun {
            trace,
            lambda_tilde: self.lambda_tilde,
            max_level: j_max,
            openings: self.openings,
            skips: self.skips,
            candidates,
            output_level,
            tree: self.tree,
        })
    }
}

/// Runs the optimizer once against `env`.
pub fn run(config: KometoConfig, env: &mut Environment) -> Result<KometoRun> {
    if config.arity < 2 {
        return Err(Error::param("arity must be at least 2"));
    }
    Kometo::new(config, env)?.run()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::fidelity::{
        CostToBiasModel, FidelitySchedule, MultiFidelityFunction, ShiftedFunction,
    };
    use crate::partition::Bounds;

    fn line_env(budget: f64, model: CostToBiasModel) -> Environment {
        let f: Arc<dyn MultiFidelityFunction> = Arc::new(ShiftedFunction::new(
            "tent",
            Bounds::unit(1),
            1.0,
            |x: &[f64]| 1.0 - (x[0] - 0.3).abs(),
        ));
        Environment::new(f, FidelitySchedule::unbounded(model).unwrap(), budget).unwrap()
    }

    #[test]
    fn eager_opening_charges_every_level() {
        let mut env = line_env(1e6, CostToBiasModel::Cutoff { a: 1.0 });
        let cfg = KometoConfig {
            lazy_child_evaluation: false,
            ..KometoConfig::default()
        };
        let mut k = Kometo::new(cfg, &mut env).unwrap();
        assert!(k.open_cell(CellId::ROOT, 2).unwrap());
        assert!(!k.open_cell(CellId::ROOT, 1).unwrap());
        drop(k);
        assert_eq!(env.ledger().events().len(), 6);
        let spent = env.spent();
        assert!((spent - 22.21467585477939).abs() < 1e-9);
        assert!(spent < 2.0 * 3f64.exp() / (std::f64::consts::E - 1.0));
    }

    #[test]
    fn selection_prefers_value_then_index() {
        let mut env = line_env(1e6, CostToBiasModel::Cutoff { a: 1.0 });
        let mut k = Kometo::new(KometoConfig::default(), &mut env).unwrap();
        k.open_cell(CellId::ROOT, 0).unwrap();
        assert_eq!(k.select_and_open(1, 0).unwrap(), Ok(CellId::new(1, 0)));
        assert_eq!(k.select_and_open(1, 0).unwrap(), Ok(CellId::new(1, 1)));
        assert_eq!(
            k.select_and_open(1, 0).unwrap(),
            Err(SkipReason::NoCandidate)
        );
        assert_eq!(
            k.select_and_open(5, 0).unwrap(),
            Err(SkipReason::NoCandidate)
        );
    }

    #[test]
    fn degenerate_budget_returns_root() {
        let mut env = line_env(1.0, CostToBiasModel::Cutoff { a: 1.0 });
        let out = run(KometoConfig::default(), &mut env).unwrap();
        assert_eq!(out.lambda_tilde, 0);
        assert_eq!(out.trace.output, vec![0.5]);
        assert_eq!(out.trace.spent, 0.0);
    }

    #[test]
    fn stays_within_budget() {
        for budget in [10.0, 1e3, 1e4, 1e5] {
            for lazy in [true, false] {
                for opt in [true, false] {
                    let mut env =
                        line_env(budget, CostToBiasModel::PolyDecay { a: 1.0, alpha: 1.0 });
                    let cfg = KometoConfig {
                        lazy_child_evaluation: lazy,
                        budget_optimization: opt,
                        ..KometoConfig::default()
                    };
                    let out = run(cfg, &mut env).unwrap();
                    assert!(out.trace.spent <= budget);
                    assert!(env.ledger().audit());
                }
            }
        }
    }
}
