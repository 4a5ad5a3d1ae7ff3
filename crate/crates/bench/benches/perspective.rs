use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use perspecta_core::ensembles::{random_pd, EnsembleConfig, RngStream};
use perspecta_core::{eig, geometric_mean, loewner_leq, lookup, perspective, PdMatrix, PerspectiveOrder};
use std::hint::black_box;

fn pair(dim: usize) -> (PdMatrix, PdMatrix) {
    let cfg = EnsembleConfig::new(dim);
    let mut rng = RngStream::new(1).child("bench").child(dim).rng();
    (random_pd(&cfg, &mut rng).unwrap(), random_pd(&cfg, &mut rng).unwrap())
}

fn bench_perspective(c: &mut Criterion) {
    let f = lookup("neg_log").unwrap();
    let mut group = c.benchmark_group("perspective_neg_log");
    for dim in [2, 4, 8, 16] {
        let (a, b) = pair(dim);
        group.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |bench, _| {
            bench.iter(|| perspective(&f, black_box(&a), black_box(&b), PerspectiveOrder::WeightFirst).unwrap())
        });
    }
    group.finish();
}

fn bench_primitives(c: &mut Criterion) {
    let (a, b) = pair(8);
    c.bench_function("eig_8", |bench| bench.iter(|| eig(black_box(a.as_hermitian())).unwrap()));
    c.bench_function("loewner_leq_8", |bench| {
        bench.iter(|| loewner_leq(black_box(a.as_hermitian()), black_box(b.as_hermitian()), 1e-8).unwrap())
    });
    c.bench_function("geometric_mean_8", |bench| bench.iter(|| geometric_mean(black_box(&a), black_box(&b)).unwrap()));
}

criterion_group!(benches, bench_perspective, bench_primitives);
criterion_main!(benches);
