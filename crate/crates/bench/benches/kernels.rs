use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use e2lmvsc::losses::{coding_rate_global, loss_rel};
use e2lmvsc::model::materialize_affinity;
use e2lmvsc::numcore::RngStream;

fn affinity(c: &mut Criterion) {
    let mut group = c.benchmark_group("materialize_affinity");
    group.sample_size(10);
    for n in [500, 2000] {
        let u = RngStream::new(1, 0).normal_matrix(20, n, 0.3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| materialize_affinity(black_box(u), 0.1, 256))
        });
    }
    group.finish();
}

fn relation_loss(c: &mut Criterion) {
    let mut group = c.benchmark_group("loss_rel");
    group.sample_size(10);
    for n in [500, 2000] {
        let u = RngStream::new(2, 0).normal_matrix(20, n, 0.3);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| loss_rel(black_box(u), 0.1, 256).unwrap())
        });
    }
    group.finish();
}

fn logdet(c: &mut Criterion) {
    let mut group = c.benchmark_group("coding_rate_global");
    for n in [400, 4000] {
        let u = RngStream::new(3, 0).normal_matrix(20, n, 1.0);
        group.bench_with_input(BenchmarkId::from_parameter(n), &u, |b, u| {
            b.iter(|| coding_rate_global(black_box(u), 0.5).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, affinity, relation_loss, logdet);
criterion_main!(benches);
