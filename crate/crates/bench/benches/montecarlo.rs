use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use pdouglas_bench::{data, exponent};
use pdouglas_core::montecarlo::mc_expectation;
use pdouglas_core::{BoundaryFunction, DomainSpec, McConfig};

fn exit_sampling(c: &mut Criterion) {
    let mut group = c.benchmark_group("mc_expectation");
    group.sample_size(10);
    let n = 100_000;
    group.throughput(Throughput::Elements(n));
    let disk = McConfig::new(DomainSpec::Disk, vec![0.3, 0.0], n, 7);
    let g = data("cos");
    group.bench_function(BenchmarkId::new("disk", n), |b| b.iter(|| mc_expectation(&disk, &g, exponent(2.0)).unwrap()));
    let ball_domain = DomainSpec::ball(3).unwrap();
    let ball = McConfig::new(ball_domain, vec![0.0, 0.0, 0.4], n, 7);
    let h = BoundaryFunction::parse_for(&ball_domain, "linear:0,0,1,0").unwrap();
    group.bench_function(BenchmarkId::new("ball-wos", n), |b| b.iter(|| mc_expectation(&ball, &h, exponent(2.0)).unwrap()));
    group.finish();
}

criterion_group!(benches, exit_sampling);
criterion_main!(benches);
