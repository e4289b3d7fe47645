use criterion::{criterion_group, criterion_main, Criterion};
use qgs_cli::{run_scan, ScanConfig};
use std::hint::black_box;

fn bench_scan(c: &mut Criterion) {
    let cfg = ScanConfig {
        steps: 21,
        ..ScanConfig::default()
    };
    let mut group = c.benchmark_group("run_scan_21_positions");
    group.sample_size(10);
    for workers in [1usize, 4] {
        group.bench_function(format!("workers_{workers}"), |b| b.iter(|| run_scan(black_box(&cfg), workers)));
    }
    group.finish();
}

criterion_group!(benches, bench_scan);
criterion_main!(benches);
