use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::profile::SmoothnessProfile;
use super::tree::{BranchRule, TreeInstance, TruncatedTree};
use crate::error::{Error, Result};
use crate::fidelity::CostToBiasModel;
use crate::partition::{Bounds, Partition};

/// On-disk form of a tree instance: profile, bias model, explicit node lists
/// per depth, and the branch continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeInstanceFile {
    pub name: String,
    pub profile: SmoothnessProfile,
    pub model: CostToBiasModel,
    #[serde(default = "one")]
    pub dim: usize,
    pub levels: Vec<Vec<u128>>,
    pub anchor: u128,
    pub branch: BranchRule,
}

fn one() -> usize {
    1
}

impl TreeInstanceFile {
    pub fn from_instance(inst: &TreeInstance) -> Self {
        let tree = inst.tree();
        TreeInstanceFile {
            name: crate::fidelity::MultiFidelityFunction::name(inst).to_owned(),
            profile: *inst.profile(),
            model: *inst.model(),
            dim: inst.dim(),
            levels: tree
                .levels()
                .iter()
                .map(|l| l.iter().copied().collect())
                .collect(),
            anchor: tree.anchor(),
            branch: tree.rule(),
        }
    }

    pub fn into_instance(self) -> Result<TreeInstance> {
        let max = Partition::new(Bounds::unit(self.dim.max(1)), self.profile.k)?.max_depth();
        let levels: Vec<BTreeSet<u128>> = self
            .levels
            .into_iter()
            .map(|l| l.into_iter().collect())
            .collect();
        let tree = TruncatedTree::new(self.profile.k, levels, self.anchor, self.branch, max)?;
        TreeInstance::new(self.name, self.profile, self.model, self.dim, tree)
    }
}

pub fn tree_instance_to_json(inst: &TreeInstance) -> String {
    serde_json::to_string_pretty(&TreeInstanceFile::from_instance(inst))
        .expect("tree instances always serialize")
}

pub fn tree_instance_from_json(text: &str) -> Result<TreeInstance> {
    let file: TreeInstanceFile = serde_json::from_str(text).map_err(|e| Error::Format {
        path: "<memory>".into(),
        message: e.to_string(),
    })?;
    file.into_instance()
}

pub fn save_tree_instance(inst: &TreeInstance, path: &Path) -> Result<()> {
    std::fs::write(path, tree_instance_to_json(inst)).map_err(|e| Error::io(path, e))
}

pub fn load_tree_instance(path: &Path) -> Result<TreeInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: TreeInstanceFile = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    file.into_instance()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::random_tree_instance;

    #[test]
    fn json_round_trip() {
        let p = SmoothnessProfile::with_min_constant(1.0, 0.5, 0.5, 2).unwrap();
        let inst = random_tree_instance(p, CostToBiasModel::PolyDecay { a: 1.0, alpha: 2.0 }, 8, 7)
            .unwrap();
        let text = tree_instance_to_json(&inst);
        let back = tree_instance_from_json(&text).unwrap();
        assert_eq!(back.tree(), inst.tree());
        assert_eq!(back.profile(), inst.profile());
        assert_eq!(tree_instance_to_json(&back), text);
    }
}
