//! Monte Carlo throughput of the two execution backends.
//!
//! `cargo bench` measures the rayon backend on a one-thread pool and on a
//! pool with one thread per core; `cargo bench --no-default-features`
//! measures the sequential fallback under the same names. Groups carry the
//! backend in their name (`parallel` or `fallback`), so both runs land side
//! by side in the criterion report.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lisnoma::channel::{sample_cascade, simulate_ber_with, simulate_pep, BerOptions};
use lisnoma::pep::default_event;
use lisnoma::{SnrGrid, SystemConfig};
use std::hint::black_box;

fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = rayon::current_num_threads();
    let mut out = vec![(
        "one_thread".to_string(),
        rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap(),
    )];
    out.push((
        format!("all_cores_{n}"),
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .unwrap(),
    ));
    out
}

fn backend() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "fallback"
    }
}

fn cascade(c: &mut Criterion) {
    let cfg = SystemConfig::reference(15);
    let count = 1u64 << 20;
    let mut group = c.benchmark_group(format!("sample_cascade/{}", backend()));
    group.throughput(Throughput::Elements(count));
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(sample_cascade(&cfg, 0, count, 3).unwrap())))
        });
    }
    group.finish();
}

fn pep(c: &mut Criterion) {
    let cfg = SystemConfig::reference(15);
    let event = default_event(&cfg, 0).unwrap().with_snr(1e3);
    let trials = 1u64 << 18;
    let mut group = c.benchmark_group(format!("simulate_pep/{}", backend()));
    group.throughput(Throughput::Elements(trials));
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(simulate_pep(&cfg, &event, trials, 5).unwrap())))
        });
    }
    group.finish();
}

fn ber(c: &mut Criterion) {
    let cfg = SystemConfig::reference(6);
    let grid = SnrGrid::db_range(0.0, 20.0, 10.0).unwrap();
    let opts = BerOptions {
        max_frames: 1 << 18,
        min_errors: None,
        seed: 11,
    };
    let mut group = c.benchmark_group(format!("simulate_ber/{}", backend()));
    group.throughput(Throughput::Elements(opts.max_frames * grid.len() as u64));
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            b.iter(|| pool.install(|| black_box(simulate_ber_with(&cfg, &grid, &opts).unwrap())))
        });
    }
    group.finish();
}

criterion_group!(benches, cascade, pep, ber);
criterion_main!(benches);
