use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ymbvp::shooting::{connecting_orbit, shot_events, DEFAULT_X_MAX};
use ymbvp::{classify, find_astar, integrate_x, solve_sensitivity, StepControl, XState};

fn integrate(c: &mut Criterion) {
    let ctrl = StepControl::default();
    let events = shot_events(true);
    c.bench_function("integrate_x a=0.5", |b| {
        b.iter(|| integrate_x(XState::new(0.0, 0.0, black_box(0.5)), &ctrl, &events, 10.0).unwrap())
    });
}

fn shots(c: &mut Criterion) {
    let ctrl = StepControl::default();
    let mut g = c.benchmark_group("classify");
    for a in [0.01, 0.16, 0.18, 1.0] {
        g.bench_function(format!("a={a}"), |b| {
            b.iter(|| classify(black_box(a), &ctrl, DEFAULT_X_MAX).unwrap().tag)
        });
    }
    g.finish();
}

fn astar(c: &mut Criterion) {
    let ctrl = StepControl::default();
    let mut g = c.benchmark_group("find_astar");
    g.sample_size(20);
    for tol in [1e-6, 1e-10] {
        g.bench_function(format!("tol={tol:e}"), |b| {
            b.iter(|| find_astar((0.01, 0.71), black_box(tol), &ctrl, DEFAULT_X_MAX).unwrap())
        });
    }
    let res = find_astar((0.01, 0.71), 1e-10, &ctrl, DEFAULT_X_MAX).unwrap();
    g.bench_function("connecting_orbit x=25", |b| {
        b.iter(|| connecting_orbit(&res, black_box(25.0), &ctrl).unwrap())
    });
    g.finish();
}

fn sensitivity(c: &mut Criterion) {
    let ctrl = StepControl::default();
    c.bench_function("solve_sensitivity a=0.5 r<=3", |b| {
        b.iter(|| solve_sensitivity(black_box(0.5), 3.0, &ctrl).unwrap())
    });
}

criterion_group!(benches, integrate, shots, astar, sensitivity);
criterion_main!(benches);
