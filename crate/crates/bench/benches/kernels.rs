use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use latwce::wce::{avg_wce_squared_factorized, WceEvaluator};
use latwce::{tn_table, Mode, Weights};
use std::hint::black_box;

fn weights(d: usize) -> Weights {
    let g: Vec<(i64, i64)> = (1..=d as i64).map(|j| (1, j * j)).collect();
    Weights::product_ratios(&g, Mode::Exact).unwrap()
}

fn wce_squared(c: &mut Criterion) {
    let mut group = c.benchmark_group("wce_squared");
    for (n, d) in [(47u64, 3usize), (251, 4), (1009, 8)] {
        let w = weights(d);
        let z: Vec<u64> = (1..=d as u64).map(|j| (j * j * 7) % (n - 1) + 1).collect();
        for mode in [Mode::Float, Mode::Exact] {
            let eval = WceEvaluator::new(n, &w, mode).unwrap();
            group.bench_with_input(BenchmarkId::new(format!("{mode}"), format!("n{n}_d{d}")), &z, |b, z| {
                b.iter(|| eval.e2(black_box(z)).unwrap())
            });
        }
    }
    group.finish();
}

fn tn_tables(c: &mut Criterion) {
    let mut group = c.benchmark_group("tn_table");
    for n in [1009u64, 9973] {
        group.bench_function(BenchmarkId::new("float", n), |b| {
            b.iter(|| tn_table(black_box(n), Mode::Float).unwrap())
        });
    }
    group.bench_function(BenchmarkId::new("exact", 211), |b| {
        b.iter(|| tn_table(black_box(211), Mode::Exact).unwrap())
    });
    group.finish();
}

fn factorized_average(c: &mut Criterion) {
    let mut group = c.benchmark_group("avg_wce_squared_factorized");
    group.sample_size(10);
    for n in [101u64, 401] {
        let w = weights(6);
        group.bench_function(BenchmarkId::new("float", n), |b| {
            b.iter(|| avg_wce_squared_factorized(black_box(n), &w, Mode::Float).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, wce_squared, tn_tables, factorized_average);
criterion_main!(benches);
