//! Hot-path benchmarks: tail quadrature, monotone inversion, blow-up
//! detection, the radial Newton solve, the neutral window, and the flux
//! map tabulation.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use blowup_core::boundary::{FluxCache, FluxSolver};
use blowup_core::elliptic::{solve_dirichlet, GridSpec, RadialGrid};
use blowup_core::law::{AbsorptionLaw, ForcingLaw};
use blowup_core::neutral::{controlled_explosion, ControlConfig};
use blowup_core::scalar::{integrate_until_blowup, StepControl};
use blowup_core::selfsim::{sample_points, SelfSimilarSolution};

fn bench_phi(c: &mut Criterion) {
    let custom = ForcingLaw::custom("cubic-shift", |s| (1.0 + s).powi(3), 1.0).unwrap();
    c.bench_function("phi_tail_quadrature", |b| {
        b.iter(|| custom.phi(black_box(0.5)).unwrap())
    });
    c.bench_function("phi_inv_numeric", |b| {
        b.iter(|| custom.phi_inv(black_box(0.1)).unwrap())
    });
    let power = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
    c.bench_function("phi_inv_closed_form", |b| {
        b.iter(|| power.phi_inv(black_box(0.25)).unwrap())
    });
}

fn bench_blowup_detection(c: &mut Criterion) {
    let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
    let control = StepControl { cap: 1e6, ..StepControl::default() };
    c.bench_function("scalar_blowup_to_1e6", |b| {
        b.iter(|| integrate_until_blowup(black_box(&law), 1.0, control).unwrap())
    });
}

fn bench_elliptic(c: &mut Criterion) {
    let g = AbsorptionLaw::power(3.0).unwrap();
    let grid = RadialGrid::new(1.0, 3, GridSpec::default()).unwrap();
    c.bench_function("radial_newton_cold", |b| {
        b.iter(|| solve_dirichlet(black_box(&g), &grid, 10.0, None).unwrap())
    });
    c.bench_function("flux_cache_two_decades", |b| {
        b.iter(|| {
            let mut solver = FluxSolver::new(&g, 1.0, 3, GridSpec::default()).unwrap();
            FluxCache::build(&mut solver, 1.0, 100.0, 16).unwrap()
        })
    });
}

fn bench_neutral_window(c: &mut Criterion) {
    let law = ForcingLaw::power(2.0, 0.0, 1.0).unwrap();
    let mut group = c.benchmark_group("neutral");
    group.sample_size(10);
    group.bench_function("controlled_explosion_two_periods", |b| {
        b.iter(|| controlled_explosion(black_box(&law), 1.0, ControlConfig::default(), 4.0).unwrap())
    });
    group.finish();
}

fn bench_selfsim(c: &mut Criterion) {
    let sol = SelfSimilarSolution::new(3.0).unwrap();
    let samples = sample_points(0, 1000, 3.0);
    c.bench_function("selfsim_scaling_batch", |b| {
        b.iter(|| sol.scaling_invariance(black_box(2.0), &samples).unwrap())
    });
}

criterion_group!(
    benches,
    bench_phi,
    bench_blowup_detection,
    bench_elliptic,
    bench_neutral_window,
    bench_selfsim
);
criterion_main!(benches);
