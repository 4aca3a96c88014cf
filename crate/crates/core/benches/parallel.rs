use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rkf::experiment::{run_experiment, Experiment};
use rkf::{bundled, enumerate_combinations, Parallelism};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

fn enumeration(c: &mut Criterion) {
    let schema = bundled::simple_pc();
    let mut group = c.benchmark_group("enumerate_with_relations");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| enumerate_combinations(&schema, bundled::PC_SYSTEM, true, mode).unwrap())
        });
    }
    group.finish();
}

fn repetitions(c: &mut Criterion) {
    let mut exp = Experiment::bundled("learning.spec.json").unwrap();
    exp.spec.repetitions = 4;
    let mut group = c.benchmark_group("experiment_repetitions");
    group.sample_size(10);
    for (name, mode) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| b.iter(|| run_experiment(&exp, mode)));
    }
    group.finish();
}

criterion_group!(benches, enumeration, repetitions);
criterion_main!(benches);
