use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use biphoton_core::config::{EnvelopeSpec, SimConfig};
use biphoton_core::fock::{self, FockBasis};
use biphoton_core::mode_oracle::{KineticConvention, ModeOdeSystem};
use biphoton_core::propagator;

fn propagation(c: &mut Criterion) {
    let mut group = c.benchmark_group("propagator");
    for cells in [15usize, 45, 91] {
        let cfg = SimConfig {
            cells,
            kappa: std::f64::consts::PI / cells as f64,
            steps: 1,
            envelope: EnvelopeSpec::Gaussian {
                center: (cells / 2) as f64,
                width: cells as f64 / 10.0,
            },
            ..SimConfig::default()
        };
        let state = cfg.initial_state().unwrap();
        let plan = cfg.plan().unwrap();
        group.bench_with_input(BenchmarkId::new("step", cells), &cells, |b, _| {
            b.iter(|| propagator::step(black_box(&state), &plan).unwrap())
        });
    }
    let cfg = SimConfig::default();
    let state = cfg.initial_state().unwrap();
    let plan = cfg.plan().unwrap();
    group.bench_function("cycle_45", |b| b.iter(|| propagator::evolve(black_box(&state), &plan).unwrap()));
    group.finish();
}

fn mode_space(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let lattice = cfg.lattice().unwrap();
    let modes = cfg.initial_state().unwrap().to_modes();
    let system = ModeOdeSystem::new(lattice, cfg.kappa, KineticConvention::PairSector);
    c.bench_function("mode_rhs_45", |b| b.iter(|| system.rhs(black_box(&modes))));
    c.bench_function("mode_rk4_45_one_cell", |b| {
        b.iter(|| system.integrate(black_box(&modes), 1.0, 0.01).unwrap())
    });
    let state = cfg.initial_state().unwrap();
    c.bench_function("to_modes_45", |b| b.iter(|| black_box(&state).to_modes()));
}

fn fock_space(c: &mut Criterion) {
    let mut group = c.benchmark_group("fock");
    for cells in [3usize, 5] {
        let basis = FockBasis::two_photon(cells).unwrap();
        group.bench_with_input(BenchmarkId::new("build_interaction", cells), &cells, |b, _| {
            b.iter(|| fock::build_interaction(black_box(&basis), 0.2, 1.0).unwrap())
        });
        let lattice = biphoton_core::Lattice::with_cells(cells).unwrap();
        group.bench_with_input(BenchmarkId::new("build_kinetic", cells), &cells, |b, _| {
            b.iter(|| fock::build_kinetic(black_box(&basis), lattice).unwrap())
        });
    }
    let cfg = SimConfig {
        cells: 3,
        kappa: 0.2,
        steps: 30,
        envelope: EnvelopeSpec::Gaussian {
            center: 1.0,
            width: 1.0,
        },
        ..SimConfig::default()
    };
    group.sample_size(20);
    group.bench_function("crosscheck_3", |b| b.iter(|| fock::crosscheck(black_box(&cfg)).unwrap()));
    group.finish();
}

criterion_group!(benches, propagation, mode_space, fock_space);
criterion_main!(benches);
