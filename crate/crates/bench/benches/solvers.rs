use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use coopsolve_bench::game;
use coopsolve_core::exact::{banzhaf_exact, shapley_exact};
use coopsolve_core::lp::{least_core, Formulation, LeastCoreOptions};
use coopsolve_core::mc::{shapley_mc, McConfig};
use coopsolve_core::neural::{MlpArchitecture, PayoffModel};
use coopsolve_core::{Matrix, DEFAULT_ENUMERATION_CAP};

fn exact(c: &mut Criterion) {
    let mut group = c.benchmark_group("exact");
    for n in [8, 12, 16] {
        let g = game(n, 1);
        group.bench_with_input(BenchmarkId::new("shapley", n), &g, |b, g| {
            b.iter(|| shapley_exact(black_box(g), DEFAULT_ENUMERATION_CAP).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("banzhaf", n), &g, |b, g| {
            b.iter(|| banzhaf_exact(black_box(g), true, DEFAULT_ENUMERATION_CAP).unwrap())
        });
    }
    group.finish();
}

fn least_core_lp(c: &mut Criterion) {
    let mut group = c.benchmark_group("least_core");
    for n in [6, 10] {
        let g = game(n, 2);
        for formulation in [Formulation::Minimal, Formulation::Naive] {
            let opts = LeastCoreOptions {
                formulation,
                ..LeastCoreOptions::default()
            };
            group.bench_with_input(BenchmarkId::new(format!("{formulation:?}"), n), &g, |b, g| {
                b.iter(|| least_core(black_box(g), &opts).unwrap())
            });
        }
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let g = game(10, 3);
    let cfg = McConfig::new(1000, 10, 7);
    c.bench_function("shapley_mc/n10", |b| {
        b.iter(|| shapley_mc(black_box(&g), &cfg).unwrap())
    });
}

fn forward(c: &mut Criterion) {
    let model = PayoffModel::init(&MlpArchitecture::payoff(10, 10, false), 1).unwrap();
    let rows: Vec<Vec<f64>> = (0..128).map(|i| game(10, i).normalized_weights()).collect();
    let x = Matrix::from_rows(&rows).unwrap();
    c.bench_function("forward/batch128", |b| {
        b.iter(|| model.predict(black_box(&x)).unwrap())
    });
}

criterion_group!(benches, exact, least_core_lp, monte_carlo, forward);
criterion_main!(benches);
