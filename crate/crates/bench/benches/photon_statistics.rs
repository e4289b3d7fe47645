use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qgs_bench::{default_params, generic_params};
use qgs_core::fock::{joint_pnd, joint_pnd_truncated, rho_element, rho_element_quadrature, DensityMatrix};
use qgs_core::FockIndex;
use std::hint::black_box;

fn bench_pnd(c: &mut Criterion) {
    let mut group = c.benchmark_group("joint_pnd_truncated");
    for n_max in [16usize, 36, 54] {
        let p = default_params(0.5);
        group.bench_with_input(BenchmarkId::from_parameter(n_max), &n_max, |b, &n| {
            b.iter(|| joint_pnd_truncated(black_box(&p), n))
        });
    }
    group.finish();
    let p = default_params(0.0);
    c.bench_function("joint_pnd_adaptive_zero_separation", |b| b.iter(|| joint_pnd(black_box(&p), 16)));
}

fn bench_elements(c: &mut Criterion) {
    let p = generic_params();
    let idx = FockIndex::new(3, 2, 2, 3).unwrap();
    c.bench_function("rho_element", |b| b.iter(|| rho_element(black_box(&p), idx)));
    c.bench_function("rho_element_quadrature", |b| b.iter(|| rho_element_quadrature(black_box(&p), idx)));
    c.bench_function("density_matrix_tables_12", |b| b.iter(|| DensityMatrix::new(black_box(&p), 12, 12)));
}

criterion_group!(benches, bench_pnd, bench_elements);
criterion_main!(benches);
