use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use uwbsim::config::parse;
use uwbsim::experiment::{run_experiment_with, Execution};

fn sweep(c: &mut Criterion) {
    let spec = parse(
        "scenario.sim_duration = 5\nmetrics.truncation_guard = 1\nexperiment.replications = 4\n\
         sweep.mac.variant = unslotted, slotted",
    )
    .unwrap();
    let mut g = c.benchmark_group("sweep_8_runs");
    g.sample_size(10);
    for (name, mode) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        g.bench_with_input(BenchmarkId::from_parameter(name), &mode, |b, &mode| {
            b.iter(|| run_experiment_with(black_box(&spec), mode).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, sweep);
criterion_main!(benches);
