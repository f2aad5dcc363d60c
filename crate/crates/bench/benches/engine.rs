use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grapheneqg_bench::{cosine_solver, free_solver, paper_stack};
use grapheneqg_core::cones::analyse_cones;
use grapheneqg_core::dispersion::{dispersion_surface, roots_closed_form, roots_numeric};
use grapheneqg_core::{ConeOptions, QuasiMomentum, ThetaGrid};

fn monodromy(c: &mut Criterion) {
    let solver = cosine_solver(3.0);
    c.bench_function("monodromy/4096", |b| {
        b.iter(|| solver.monodromy(black_box(12.5)).unwrap())
    });
    c.bench_function("hill_bands/0..100", |b| {
        b.iter(|| solver.hill_bands(black_box(0.0), 100.0).unwrap())
    });
}

fn roots(c: &mut Criterion) {
    let theta = QuasiMomentum::new(0.7, -1.9);
    let mut g = c.benchmark_group("roots");
    for layers in [2, 3] {
        let spec = paper_stack(layers);
        g.bench_with_input(BenchmarkId::new("closed_form", layers), &spec, |b, s| {
            b.iter(|| roots_closed_form(s, black_box(theta)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("numeric", layers), &spec, |b, s| {
            b.iter(|| roots_numeric(s, black_box(theta)).unwrap())
        });
    }
    g.finish();
}

fn surfaces(c: &mut Criterion) {
    let solver = free_solver();
    let band = solver.hill_bands(0.0, 40.0).unwrap()[0];
    let mut g = c.benchmark_group("dispersion_surface");
    g.sample_size(10);
    for n in [32, 128] {
        let grid = ThetaGrid::new(n, n).unwrap();
        g.bench_with_input(BenchmarkId::new("trilayer", n), &grid, |b, grid| {
            b.iter(|| dispersion_surface(&paper_stack(3), &solver, grid, &band).unwrap())
        });
    }
    g.finish();
}

fn cones(c: &mut Criterion) {
    let options = ConeOptions::default();
    c.bench_function("analyse_cones/trilayer", |b| {
        b.iter(|| analyse_cones(&paper_stack(3), &options).unwrap())
    });
}

criterion_group!(benches, monodromy, roots, surfaces, cones);
criterion_main!(benches);
