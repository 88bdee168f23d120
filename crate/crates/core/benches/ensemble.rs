use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use urnsync::clt::{clt_moment_test_with, CltTestConfig};
use urnsync::montecarlo::{run_replicas_with, EnsembleSpec};
use urnsync::{Execution, ModelParams};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn ensemble(c: &mut Criterion) {
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for replicas in [256u64, 2048] {
        let params = ModelParams::new(5, 1, 1, 0.5).unwrap();
        let times: Vec<u64> = (1..=20).map(|k| 5 * k).collect();
        let spec = EnsembleSpec::new(params, replicas, 100, 1, times);
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, replicas), &spec, |b, spec| {
                b.iter(|| run_replicas_with(spec, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn clt(c: &mut Criterion) {
    let mut group = c.benchmark_group("clt");
    group.sample_size(10);
    let config = CltTestConfig::new(ModelParams::new(1000, 1, 1, 0.5).unwrap(), 500, 20, 1);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| clt_moment_test_with(&config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ensemble, clt);
criterion_main!(benches);
