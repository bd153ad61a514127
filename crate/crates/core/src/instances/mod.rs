//! Instance constructors: truncated-tree targets with their verifier, and
//! the synthetic benchmark functions.

mod benchmarks;
mod io;
mod profile;
mod tree;

pub use benchmarks::{benchmark, benchmark_by_name, halton_points, Benchmark, BenchmarkName};
pub use io::{
    load_tree_instance, save_tree_instance, tree_instance_from_json, tree_instance_to_json,
    TreeInstanceFile,
};
pub use profile::SmoothnessProfile;
pub use tree::{
    make_depth_limited_instance, make_width_limited_family, random_tree_instance,
    single_branch_instance, verify_membership, BranchRule, Check, Counterexample, MembershipReport,
    TreeInstance, TruncatedTree,
};
