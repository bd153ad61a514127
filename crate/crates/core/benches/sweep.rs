use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use kometo::exec::Execution;
use kometo::fidelity::{CostToBiasModel, Environment, FidelitySchedule, MultiFidelityFunction};
use kometo::instances::{random_tree_instance, SmoothnessProfile};
use kometo::kometo::{run, KometoConfig};

fn sweep(exec: Execution, budgets: &[f64]) -> f64 {
    let profile = SmoothnessProfile::with_min_constant(1.0, 0.5, 0.5, 2).unwrap();
    let model = CostToBiasModel::PolyDecay { a: 1.0, alpha: 1.0 };
    let cells: Vec<(u64, f64)> = (0..8u64)
        .flat_map(|seed| budgets.iter().map(move |&b| (seed, b)))
        .collect();
    exec.map(cells, |(seed, budget)| {
        let inst = random_tree_instance(profile, model, 8, seed).unwrap();
        let f: Arc<dyn MultiFidelityFunction> = Arc::new(inst);
        let schedule = FidelitySchedule::unbounded(model).unwrap();
        let mut env = Environment::new(f, schedule, budget).unwrap();
        run(KometoConfig::default(), &mut env).unwrap().trace.regret
    })
    .into_iter()
    .sum()
}

fn bench_sweep(c: &mut Criterion) {
    let budgets = [1e3, 1e4, 1e5, 1e6];
    let mut group = c.benchmark_group("kometo-sweep");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("{exec:?}")),
            &exec,
            |b, &exec| b.iter(|| sweep(exec, &budgets)),
        );
    }
    group.finish();
}

criterion_group!(benches, bench_sweep);
criterion_main!(benches);
