use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use diffoci_core::datasets::{gen_toy_with, ToyKind, ToyOptions};
use diffoci_core::{compute_ranks, foci_select, t_n, t_n_beta, xi_n, Graph};

fn data(n: usize, p: usize) -> diffoci_core::datasets::Dataset {
    let opts = ToyOptions {
        n,
        p,
        ..ToyKind::FociToy.defaults()
    };
    gen_toy_with(ToyKind::FociToy, opts, 0).unwrap()
}

fn hard_estimators(c: &mut Criterion) {
    let mut group = c.benchmark_group("hard");
    for n in [100, 1000] {
        let ds = data(n, 4);
        let x0: Vec<f64> = ds.x.column(0).to_vec();
        let z = ds.x.select_columns(&[1, 2]).unwrap();
        let x = ds.x.select_columns(&[0]).unwrap();
        group.bench_with_input(BenchmarkId::new("xi_n", n), &n, |b, _| {
            b.iter(|| xi_n(black_box(&x0), black_box(&ds.y), 0).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("t_n", n), &n, |b, _| {
            b.iter(|| t_n(black_box(&ds.y), &z, Some(&x), 0).unwrap())
        });
    }
    let ds = data(500, 20);
    group.sample_size(10);
    group.bench_function("foci_select/500x20", |b| {
        b.iter(|| foci_select(black_box(&ds.y), &ds.x, None, 0).unwrap())
    });
    group.finish();
}

fn soft_estimator(c: &mut Criterion) {
    let mut group = c.benchmark_group("soft");
    for n in [100, 256] {
        let ds = data(n, 4);
        let ranks = compute_ranks(&ds.y, 0).unwrap();
        let z = ds.x.select_columns(&[1, 2, 3]).unwrap().into_values();
        let x = ds.x.select_columns(&[0]).unwrap().into_values();
        group.bench_with_input(BenchmarkId::new("t_n_beta_forward_backward", n), &n, |b, _| {
            b.iter(|| {
                let mut g = Graph::new();
                let zv = g.param(z.clone());
                let t = t_n_beta(&mut g, &ranks, zv, Some(x.view()), 5.0).unwrap();
                g.backward(t).unwrap();
                black_box(g.grad(zv))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, hard_estimators, soft_estimator);
criterion_main!(benches);
