use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pdouglas_bench::{data, exponent, DATA};
use pdouglas_core::forms::{boundary_form_hdp, green_weighted_energy, interior_energy_edp_lenient};
use pdouglas_core::harmonic::fourier_project;
use pdouglas_core::{DomainSpec, QuadratureGrid};

fn boundary_form(c: &mut Criterion) {
    let mut group = c.benchmark_group("boundary_form_hdp");
    group.sample_size(20);
    for name in DATA {
        let g = data(name);
        for level in [1, 3] {
            let grid = QuadratureGrid::at_level(level);
            group.bench_with_input(BenchmarkId::new(name, level), &grid, |b, grid| {
                b.iter(|| boundary_form_hdp(&g, exponent(3.0), &DomainSpec::Disk, grid).unwrap())
            });
        }
    }
    group.finish();
}

fn interior(c: &mut Criterion) {
    let mut group = c.benchmark_group("interior_energy");
    group.sample_size(20);
    let h = fourier_project(&data("shifted-cos:0.5"), 16).unwrap();
    for level in [1, 3] {
        let grid = QuadratureGrid::at_level(level);
        group.bench_with_input(BenchmarkId::new("edp", level), &grid, |b, grid| {
            b.iter(|| interior_energy_edp_lenient(&h, exponent(3.0), grid).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("green_weighted", level), &grid, |b, grid| {
            b.iter(|| green_weighted_energy(&h, exponent(3.0), [0.3, 0.0], grid).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, boundary_form, interior);
criterion_main!(benches);
