use criterion::{criterion_group, criterion_main, Criterion};
use spectrum_core::exec::Execution;
use spectrum_core::fixtures;
use spectrum_core::montecarlo::{recovery_experiment, RecoveryConfig};

fn recovery(c: &mut Criterion) {
    let targets = fixtures::moment_targets();
    let truth = fixtures::table5_params();
    let system = fixtures::paper_model();
    let config = RecoveryConfig::new(500, 32, 1);
    let mut group = c.benchmark_group("recovery_n500_r32");
    group.sample_size(10);
    for (label, exec) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        group.bench_function(label, |b| {
            b.iter(|| recovery_experiment(&targets, &truth, &system, &config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, recovery);
criterion_main!(benches);
