use std::collections::BTreeSet;
use std::path::Path;
use std::process::{Command, Output};

use kometo::fidelity::CostToBiasModel;
use kometo::instances::{
    random_tree_instance, save_tree_instance, BranchRule, SmoothnessProfile, TreeInstance,
    TruncatedTree,
};

fn kometo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kometo"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn profile() -> SmoothnessProfile {
    SmoothnessProfile::with_min_constant(1.0, 0.5, 0.0, 2).unwrap()
}

#[test]
fn verify_accepts_members_and_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let model = CostToBiasModel::Cutoff { a: 1.0 };
    let good = random_tree_instance(profile(), model, 8, 4).unwrap();
    save_tree_instance(&good, &dir.path().join("good.json")).unwrap();
    let out = kometo(&["verify", "good.json", "--horizon", "20"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut levels: Vec<BTreeSet<u128>> = (0..=6).map(|_| BTreeSet::from([0])).collect();
    levels[4].insert(1);
    levels[5].insert(2);
    levels[6].insert(4);
    let tree = TruncatedTree::new(2, levels, 0, BranchRule::Child(0), 60).unwrap();
    let bad = TreeInstance::new("bad", profile(), model, 1, tree).unwrap();
    save_tree_instance(&bad, &dir.path().join("bad.json")).unwrap();
    let out = kometo(&["verify", "bad.json", "--horizon", "20"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let report = String::from_utf8_lossy(&out.stdout);
    assert!(report.contains("node_count"), "{report}");
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("bad.toml"),
        "budgets = [10.0]\nwhatever = 1\n",
    )
    .unwrap();
    assert_eq!(
        kometo(&["run", "bad.toml"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        kometo(&["run", "missing.toml"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        kometo(&["bench", "rosenbrock"], dir.path()).status.code(),
        Some(2)
    );
    assert_eq!(
        kometo(&["bounds", "--model", "poly:1"], dir.path())
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn run_writes_sorted_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
budgets = [100.0, 10.0]
seeds = [1, 0]

[instance]
kind = "benchmark"
name = "currin"
model = { kind = "exp_decay", b = 5.0, sigma = 2.0, beta = 0.5 }

[cost_scale]
kind = "capped"
top_cost = 10.0

[[algorithms]]
name = "kometo"
budget_optimization = true

[[algorithms]]
name = "modified-log"

[output]
csv = "out/currin.csv"
"#;
    std::fs::write(dir.path().join("exp.toml"), config).unwrap();
    let out = kometo(&["run", "exp.toml", "--sequential"], dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("out/currin.csv")).unwrap();
    let keys: Vec<(String, String, String)> = text
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].to_string(), f[3].to_string())
        })
        .collect();
    assert_eq!(keys.len(), 8);
    assert_eq!(keys[0], ("kometo".into(), "100.0".into(), "0".into()));
    assert_eq!(
        keys[7],
        ("modified-log".into(), "1000.0".into(), "1".into())
    );
}

#[test]
fn bound_tables_print() {
    let dir = tempfile::tempdir().unwrap();
    let out = kometo(
        &["bounds", "--d", "0.5", "--budgets", "1000,100000"],
        dir.path(),
    );
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().count(), 3);
    let out = kometo(
        &[
            "adversarial",
            "--variant",
            "a",
            "--d",
            "1",
            "--json",
            "--budgets",
            "1e4",
        ],
        dir.path(),
    );
    assert!(out.status.success());
    let rows: Vec<(f64, f64)> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 1);
    assert!(rows[0].1 >= 0.0);
}
