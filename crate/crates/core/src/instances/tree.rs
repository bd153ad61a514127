//! Piecewise-constant targets defined by truncated trees of the partition.
//!
//! A truncated tree is a prefix-closed set of cells. The target value at `x`
//! is `−ν ρ^{h*}`, where `h*` is the deepest depth at which the cell
//! containing `x` still belongs to the tree; points on the single infinite
//! branch score `0`. Fidelity `z` observes `min(f, −ζ(z))`.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::profile::SmoothnessProfile;
use crate::error::{Error, Result};
use crate::fidelity::{CostToBiasModel, MultiFidelityFunction};
use crate::partition::{Bounds, CellId, Partition};

/// How the infinite branch continues below the explicit levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchRule {
    /// Always descend into child `l`.
    Child(usize),
    /// Pseudo-random child per depth, derived from the seed.
    Seeded(u64),
}

impl BranchRule {
    pub fn slot(self, depth: u32, k: usize) -> usize {
        match self {
            BranchRule::Child(l) => l.min(k - 1),
            BranchRule::Seeded(seed) => {
                let mut z = seed ^ (u64::from(depth)).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
                z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
                z ^= z >> 31;
                (z % k as u64) as usize
            }
        }
    }
}

/// A prefix-closed node set: explicit levels `0..=H`, then one node per depth
/// following the branch rule from `anchor` at depth `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedTree {
    arity: usize,
    levels: Vec<BTreeSet<u128>>,
    anchor: u128,
    rule: BranchRule,
    branch: Vec<u128>,
    subtree_depth: HashMap<CellId, u32>,
}

impl TruncatedTree {
    /// Builds a tree and checks that it is prefix-closed, that every
    /// explicit level is non-empty, and that `anchor` sits at the last level.
    pub fn new(
        arity: usize,
        levels: Vec<BTreeSet<u128>>,
        anchor: u128,
        rule: BranchRule,
        max_depth: u32,
    ) -> Result<Self> {
        if levels.is_empty() || levels[0] != BTreeSet::from([0]) {
            return Err(Error::param("level 0 must hold exactly the root"));
        }
        let horizon = levels.len() as u32 - 1;
        if horizon > max_depth {
            return Err(Error::param(format!(
                "explicit depth {horizon} exceeds the addressable depth {max_depth}"
            )));
        }
        for (h, level) in levels.iter().enumerate().skip(1) {
            if level.is_empty() {
                return Err(Error::param(format!("level {h} is empty")));
            }
            let width = (arity as u128).checked_pow(h as u32).unwrap_or(u128::MAX);
            for &i in level {
                if i >= width {
                    return Err(Error::param(format!("index {i} out of range at depth {h}")));
                }
                if !levels[h - 1].contains(&(i / arity as u128)) {
                    return Err(Error::param(format!(
                        "node ({h}, {i}) has no parent in the tree"
                    )));
                }
            }
        }
        if !levels[horizon as usize].contains(&anchor) {
            return Err(Error::param(format!(
                "anchor {anchor} is not a node of the last explicit level"
            )));
        }
        let mut branch = vec![anchor];
        let mut idx = anchor;
        for depth in horizon..max_depth {
            idx = idx * arity as u128 + rule.slot(depth + 1, arity) as u128;
            branch.push(idx);
        }
        let mut subtree_depth = HashMap::new();
        for h in (0..=horizon as usize).rev() {
            for &i in &levels[h] {
                let id = CellId::new(h as u32, i);
                let deepest = (0..arity)
                    .filter_map(|l| subtree_depth.get(&id.child(l, arity)).copied())
                    .max()
                    .unwrap_or(h as u32);
                subtree_depth.insert(id, deepest);
            }
        }
        Ok(TruncatedTree {
            arity,
            levels,
            anchor,
            rule,
            branch,
            subtree_depth,
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Depth of the last explicit level.
    pub fn horizon(&self) -> u32 {
        self.levels.len() as u32 - 1
    }

    pub fn levels(&self) -> &[BTreeSet<u128>] {
        &self.levels
    }

    pub fn anchor(&self) -> u128 {
        self.anchor
    }

    pub fn rule(&self) -> BranchRule {
        self.rule
    }

    /// Deepest depth at which the branch is materialized.
    pub fn max_depth(&self) -> u32 {
        self.horizon() + self.branch.len() as u32 - 1
    }

    /// Node of the infinite branch at `depth`.
    pub fn branch_node(&self, depth: u32) -> Option<CellId> {
        if depth <= self.horizon() {
            let below = self.horizon() - depth;
            let mut idx = self.anchor;
            for _ in 0..below {
                idx /= self.arity as u128;
            }
            Some(CellId::new(depth, idx))
        } else {
            self.branch
                .get((depth - self.horizon()) as usize)
                .map(|&i| CellId::new(depth, i))
        }
    }

    pub fn contains(&self, id: CellId) -> bool {
        if id.depth <= self.horizon() {
            self.levels[id.depth as usize].contains(&id.index)
        } else {
            self.branch_node(id.depth) == Some(id)
        }
    }

    pub fn on_branch(&self, id: CellId) -> bool {
        self.branch_node(id.depth) == Some(id)
    }

    /// Number of tree nodes at `depth`.
    pub fn count_at(&self, depth: u32) -> u128 {
        if depth <= self.horizon() {
            self.levels[depth as usize].len() as u128
        } else {
            u128::from(depth <= self.max_depth())
        }
    }

    /// Nodes at `depth`, in index order.
    pub fn nodes_at(&self, depth: u32) -> Vec<CellId> {
        if depth <= self.horizon() {
            self.levels[depth as usize]
                .iter()
                .map(|&i| CellId::new(depth, i))
                .collect()
        } else {
            self.branch_node(depth).into_iter().collect()
        }
    }

    /// Deepest tree depth below `id` (itself included), `None` when the
    /// subtree is infinite. `id` must belong to the tree.
    pub fn deepest_descendant(&self, id: CellId) -> Option<u32> {
        if self.on_branch(id) {
            None
        } else {
            Some(self.subtree_depth.get(&id).copied().unwrap_or(id.depth))
        }
    }

    /// Deepest tree ancestor of `id` (itself if it belongs to the tree).
    pub fn deepest_ancestor(&self, id: CellId) -> CellId {
        let mut cur = id;
        while !self.contains(cur) {
            cur = cur
                .parent(self.arity)
                .expect("the root belongs to every tree");
        }
        cur
    }
}

/// Target and fidelities built from a truncated tree.
#[derive(Debug, Clone)]
pub struct TreeInstance {
    name: String,
    profile: SmoothnessProfile,
    model: CostToBiasModel,
    partition: Partition,
    tree: TruncatedTree,
}

impl TreeInstance {
    pub fn new(
        name: impl Into<String>,
        profile: SmoothnessProfile,
        model: CostToBiasModel,
        dim: usize,
        tree: TruncatedTree,
    ) -> Result<Self> {
        profile.validate()?;
        model.validate()?;
        if tree.arity() != profile.k {
            return Err(Error::param("tree arity differs from the profile's K"));
        }
        let partition = Partition::new(Bounds::unit(dim), profile.k)?;
        Ok(TreeInstance {
            name: name.into(),
            profile,
            model,
            partition,
            tree,
        })
    }

    pub fn profile(&self) -> &SmoothnessProfile {
        &self.profile
    }

    pub fn model(&self) -> &CostToBiasModel {
        &self.model
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn tree(&self) -> &TruncatedTree {
        &self.tree
    }

    pub fn dim(&self) -> usize {
        self.partition.dim()
    }

    fn level_value(&self, depth: u32) -> f64 {
        -self.profile.nu * self.profile.rho.powi(depth as i32)
    }

    /// `sup f` over a cell, from tree membership alone.
    pub fn cell_sup(&self, id: CellId) -> f64 {
        if self.tree.contains(id) {
            match self.tree.deepest_descendant(id) {
                None => 0.0,
                Some(h) => self.level_value(h),
            }
        } else {
            self.level_value(self.tree.deepest_ancestor(id).depth)
        }
    }

    /// `inf f` over a cell.
    pub fn cell_inf(&self, id: CellId) -> f64 {
        self.level_value(self.tree.deepest_ancestor(id).depth)
    }

    /// `f(x)`.
    pub fn eval_target(&self, x: &[f64]) -> f64 {
        let stop = self.partition.descend_while(x, |id| self.tree.contains(id));
        if stop.resolution_limited {
            self.cell_sup(stop.last)
        } else {
            self.level_value(stop.last.depth)
        }
    }

    /// `min(f(x), −ζ)`.
    pub fn eval_fidelity(&self, x: &[f64], bias: f64) -> f64 {
        self.eval_target(x).min(-bias)
    }

    /// Deepest depth whose tree cell contains `x`.
    pub fn depth_of(&self, x: &[f64]) -> u32 {
        self.partition
            .descend_while(x, |id| self.tree.contains(id))
            .last
            .depth
    }
}

impl MultiFidelityFunction for TreeInstance {
    fn name(&self) -> &str {
        &self.name
    }
    fn domain(&self) -> &Bounds {
        self.partition.domain()
    }
    fn target(&self, x: &[f64]) -> f64 {
        self.eval_target(x)
    }
    fn approximation(&self, x: &[f64], _z: f64, bias: f64) -> f64 {
        self.eval_fidelity(x, bias)
    }
    fn optimum(&self) -> f64 {
        0.0
    }
}

/// Which membership check failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    ConstantBelowMinimum,
    NodeCount,
    LocalSmoothness,
    NearOptimalCount,
    BiasEnvelope,
    Sign,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub check: Check,
    pub depth: u32,
    pub cell: Option<CellId>,
    pub detail: String,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at depth {}", self.check, self.depth)?;
        if let Some(c) = self.cell {
            write!(f, ", cell {c}")?;
        }
        write!(f, ": {}", self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipReport {
    pub horizon: u32,
    pub counterexample: Option<Counterexample>,
}

impl MembershipReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

fn tolerant_le(a: f64, b: f64) -> bool {
    a <= b * (1.0 + 1e-12) + 1e-300
}

/// Exhaustive check, for every depth up to `horizon`, that the instance is a
/// valid member of its smoothness class.
pub fn verify_membership(inst: &TreeInstance, horizon: u32) -> MembershipReport {
    let fail = |check, depth, cell, detail: String| MembershipReport {
        horizon,
        counterexample: Some(Counterexample {
            check,
            depth,
            cell,
            detail,
        }),
    };
    let p = inst.profile;
    let tree = &inst.tree;
    let k = p.k as u128;
    let horizon = horizon.min(tree.max_depth());

    let c_min = p.c_min();
    if !tolerant_le(c_min, p.c) {
        return fail(
            Check::ConstantBelowMinimum,
            0,
            None,
            format!("C = {} is below C_min = {c_min}", p.c),
        );
    }

    let h0 = p.h0();
    let log3 = 3f64.ln();
    let l = p.log_inv_rho();
    let probe_costs: Vec<f64> = (0..12).map(|j| (j as f64).exp()).collect();

    for h in 0..=horizon {
        let count = tree.count_at(h);
        let cap = p.width_cap(h);
        if count < 1 || count > cap {
            return fail(
                Check::NodeCount,
                h,
                tree.nodes_at(h).last().copied(),
                format!("{count} nodes, allowed between 1 and {cap}"),
            );
        }

        let star = tree.branch_node(h).expect("branch covers the horizon");
        let drop = -inst.cell_inf(star);
        if !tolerant_le(drop, p.nu * p.rho.powi(h as i32)) || inst.cell_sup(star) != 0.0 {
            return fail(
                Check::LocalSmoothness,
                h,
                Some(star),
                format!("optimal cell loses {drop} from the optimum"),
            );
        }

        let mut near = count as f64;
        for back in 1..=h.min(h0 + 1) {
            if (back as f64) * l > log3 * (1.0 + 1e-12) {
                break;
            }
            let a = h - back;
            for node in tree.nodes_at(a) {
                let inside = (0..p.k)
                    .filter(|&s| tree.contains(node.child(s, p.k)))
                    .count() as u128;
                let off = (k - inside) as f64 * (k as f64).powi(back as i32 - 1);
                near += off;
            }
        }
        let allowed = p.c * p.width_allowance(h);
        if !tolerant_le(near, allowed) {
            return fail(
                Check::NearOptimalCount,
                h,
                None,
                format!("{near} near-optimal cells, allowed {allowed}"),
            );
        }

        for node in tree.nodes_at(h) {
            let Ok(cell) = inst.partition.cell(node) else {
                continue;
            };
            let fx = inst.eval_target(&cell.representative);
            if fx > 0.0 {
                return fail(Check::Sign, h, Some(node), format!("f = {fx} is positive"));
            }
            for &c in &probe_costs {
                let bias = inst.model.phi_unchecked(c);
                let gap = (fx - inst.eval_fidelity(&cell.representative, bias)).abs();
                if gap.is_nan() || gap > bias {
                    return fail(
                        Check::BiasEnvelope,
                        h,
                        Some(node),
                        format!("|f - f_z| = {gap} exceeds bias {bias} at cost {c}"),
                    );
                }
            }
        }
    }
    MembershipReport {
        horizon,
        counterexample: None,
    }
}

/// Explicit levels for a single path of cells.
fn path_levels(k: usize, slots: &[usize]) -> Vec<BTreeSet<u128>> {
    let mut levels = vec![BTreeSet::from([0u128])];
    let mut id = CellId::ROOT;
    for &s in slots {
        id = id.child(s, k);
        levels.push(BTreeSet::from([id.index]));
    }
    levels
}

/// One infinite branch and nothing else.
pub fn single_branch_instance(
    profile: SmoothnessProfile,
    model: CostToBiasModel,
    rule: BranchRule,
    dim: usize,
) -> Result<TreeInstance> {
    let max = Partition::new(Bounds::unit(dim), profile.k)?.max_depth();
    let tree = TruncatedTree::new(profile.k, path_levels(profile.k, &[]), 0, rule, max)?;
    TreeInstance::new(format!("branch-{rule:?}"), profile, model, dim, tree)
}

/// The leftmost path down to depth `h`, continued by `rule`.
pub fn make_depth_limited_instance(
    profile: SmoothnessProfile,
    model: CostToBiasModel,
    h: u32,
    rule: BranchRule,
) -> Result<TreeInstance> {
    if h < 1 {
        return Err(Error::param("the depth-limited construction needs h >= 1"));
    }
    let max = Partition::new(Bounds::unit(1), profile.k)?.max_depth();
    let levels = path_levels(profile.k, &vec![0; h as usize]);
    let tree = TruncatedTree::new(profile.k, levels, 0, rule, max)?;
    TreeInstance::new(format!("depth-{h}-{rule:?}"), profile, model, 1, tree)
}

/// The `K^{s+1}` instances that share a single path down to depth `h − s`,
/// a full subtree from there to depth `h`, and differ in which depth-`h + 1`
/// cell carries the infinite branch.
pub fn make_width_limited_family(
    profile: SmoothnessProfile,
    model: CostToBiasModel,
    h: u32,
    s: u32,
) -> Result<Vec<TreeInstance>> {
    profile.validate()?;
    let k = profile.k as u128;
    let top = k
        .checked_pow(s)
        .ok_or_else(|| Error::param(format!("K^{s} overflows")))?;
    if s > h || top > profile.width_cap(h) {
        return Err(Error::param(format!(
            "(h={h}, s={s}) is infeasible: need s <= h and K^s <= rho^(-d h) = {}",
            profile.width_allowance(h)
        )));
    }
    let max = Partition::new(Bounds::unit(1), profile.k)?.max_depth();
    let mut levels: Vec<BTreeSet<u128>> = (0..h - s).map(|_| BTreeSet::from([0])).collect();
    for g in h - s..=h {
        levels.push((0..k.pow(g - (h - s))).collect());
    }
    (0..top * k)
        .map(|i| {
            let mut ls = levels.clone();
            ls.push(BTreeSet::from([i]));
            let tree = TruncatedTree::new(profile.k, ls, i, BranchRule::Child(0), max)?;
            TreeInstance::new(format!("width-h{h}-s{s}-{i}"), profile, model, 1, tree)
        })
        .collect()
}

/// A random prefix-closed tree whose level sizes respect the profile's
/// allowance (capped at 32 nodes per level), continued by a seeded branch.
pub fn random_tree_instance(
    profile: SmoothnessProfile,
    model: CostToBiasModel,
    explicit_depth: u32,
    seed: u64,
) -> Result<TreeInstance> {
    profile.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = profile.k;
    let max = Partition::new(Bounds::unit(1), k)?.max_depth();
    let explicit_depth = explicit_depth.min(max);
    let mut levels = vec![BTreeSet::from([0u128])];
    for h in 1..=explicit_depth {
        let prev = &levels[h as usize - 1];
        let children: Vec<u128> = prev
            .iter()
            .flat_map(|&i| (0..k as u128).map(move |l| i * k as u128 + l))
            .collect();
        let cap = profile.width_cap(h).min(children.len() as u128).min(32) as usize;
        let want = rng.gen_range(1..=cap.max(1));
        let mut chosen = BTreeSet::new();
        while chosen.len() < want {
            chosen.insert(children[rng.gen_range(0..children.len())]);
        }
        levels.push(chosen);
    }
    let last: Vec<u128> = levels.last().expect("non-empty").iter().copied().collect();
    let anchor = last[rng.gen_range(0..last.len())];
    let tree = TruncatedTree::new(k, levels, anchor, BranchRule::Seeded(seed), max)?;
    TreeInstance::new(format!("random-{seed}"), profile, model, 1, tree)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half(d: f64) -> SmoothnessProfile {
        SmoothnessProfile::with_min_constant(1.0, 0.5, d, 2).unwrap()
    }

    fn cutoff() -> CostToBiasModel {
        CostToBiasModel::Cutoff { a: 1.0 }
    }

    #[test]
    fn leftmost_branch_values() {
        let inst = single_branch_instance(half(0.0), cutoff(), BranchRule::Child(0), 1).unwrap();
        assert_eq!(inst.eval_target(&[0.0]), 0.0);
        assert_eq!(inst.eval_target(&[0.3]), -0.5);
        assert_eq!(inst.eval_target(&[0.75]), -1.0);
        assert_eq!(inst.eval_fidelity(&[0.0], 0.1), -0.1);
        assert_eq!(inst.eval_fidelity(&[0.75], 0.1), -1.0);
        assert_eq!(inst.eval_fidelity(&[0.3], 0.0), -0.5);
    }

    #[test]
    fn regret_inside_depth_three_cell() {
        let inst = single_branch_instance(half(0.0), cutoff(), BranchRule::Child(0), 1).unwrap();
        let x = inst
            .partition()
            .cell(CellId::new(3, 0))
            .unwrap()
            .representative;
        let r = 0.0 - inst.eval_target(&x);
        assert!((0.0..=0.125).contains(&r));
    }

    #[test]
    fn single_branch_verifies() {
        let inst = single_branch_instance(half(0.0), cutoff(), BranchRule::Seeded(3), 1).unwrap();
        assert!(verify_membership(&inst, 20).passed());
    }

    #[test]
    fn small_constant_fails() {
        let p = SmoothnessProfile::new(1.0, 0.5, 0.0, 1.0, 2).unwrap();
        let inst = single_branch_instance(p, cutoff(), BranchRule::Child(0), 1).unwrap();
        let rep = verify_membership(&inst, 20);
        assert_eq!(
            rep.counterexample.unwrap().check,
            Check::ConstantBelowMinimum
        );
    }

    #[test]
    fn full_tree_at_max_dimension_verifies() {
        let p = SmoothnessProfile::new(1.0, 0.5, 1.0, 1.0, 2).unwrap();
        let levels: Vec<BTreeSet<u128>> = (0..8u32).map(|h| (0..1u128 << h).collect()).collect();
        let tree = TruncatedTree::new(2, levels, 5, BranchRule::Child(1), 127).unwrap();
        let inst = TreeInstance::new("full", p, cutoff(), 1, tree).unwrap();
        assert!(verify_membership(&inst, 12).passed());
    }

    #[test]
    fn width_family_sizes() {
        let p = SmoothnessProfile::new(1.0, 0.5, 1.0, 1.0, 2).unwrap();
        let fam = make_width_limited_family(p, cutoff(), 3, 3).unwrap();
        assert_eq!(fam.len(), 16);
        assert!(fam.iter().all(|i| verify_membership(i, 8).passed()));
        let zero = make_width_limited_family(half(0.0), cutoff(), 4, 0).unwrap();
        assert_eq!(zero.len(), 2);
        assert!(make_width_limited_family(half(0.0), cutoff(), 4, 1).is_err());
    }

    #[test]
    fn depth_limited_has_leftmost_optimum() {
        let inst =
            make_depth_limited_instance(half(0.0), cutoff(), 5, BranchRule::Child(0)).unwrap();
        assert_eq!(inst.eval_target(&[0.0]), 0.0);
        assert!(verify_membership(&inst, 20).passed());
    }

    #[test]
    fn corrupted_tree_is_located() {
        let mut levels = path_levels(2, &[0; 6]);
        levels[4].insert(1);
        levels[5].insert(2);
        levels[6].insert(4);
        let tree = TruncatedTree::new(2, levels, 0, BranchRule::Child(0), 127).unwrap();
        let inst = TreeInstance::new("bad", half(0.0), cutoff(), 1, tree).unwrap();
        let cex = verify_membership(&inst, 20).counterexample.unwrap();
        assert_eq!(cex.depth, 4);
        assert_eq!(cex.check, Check::NodeCount);
    }

    #[test]
    fn random_trees_verify() {
        for seed in 0..20 {
            for d in [0.0, 0.5, 1.0] {
                let inst = random_tree_instance(half(d), cutoff(), 10, seed).unwrap();
                let rep = verify_membership(&inst, 20);
                assert!(rep.passed(), "seed {seed} d {d}: {:?}", rep.counterexample);
            }
        }
    }
}
