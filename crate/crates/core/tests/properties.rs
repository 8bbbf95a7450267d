use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use biphoton_core::propagator::{self, MediumMask, StepPlan};
use biphoton_core::{from_modes, to_modes, Lattice, TwoPhotonState, C64};

fn random_state(m: usize, dz: f64, seed: u64) -> TwoPhotonState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut grid = || Array2::from_shape_fn((m, m), |_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let lat = Lattice::new(m, dz, 1.0).unwrap();
    TwoPhotonState::from_grids(lat, grid(), grid(), 0.0).unwrap()
}

fn random_mask(m: usize, seed: u64) -> MediumMask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    MediumMask::from_flags((0..m).map(|_| rng.random_bool(0.5)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mode_roundtrip(m in 1usize..24, dz in 0.1f64..3.0, seed in any::<u64>()) {
        let s = random_state(m, dz, seed);
        let back = from_modes(&to_modes(&s));
        prop_assert!(back.max_abs_diff(&s) < 1e-12);
    }

    #[test]
    fn parseval(m in 1usize..24, dz in 0.1f64..3.0, seed in any::<u64>()) {
        let s = random_state(m, dz, seed);
        let modes = to_modes(&s);
        prop_assert!((modes.norm() - s.norm()).abs() < 1e-10 * s.norm());
    }

    #[test]
    fn steps_are_unitary(m in 2usize..20, kappa in -2.0f64..2.0, steps in 0usize..60, seed in any::<u64>()) {
        let s = random_state(m, 1.0, seed);
        let plan = StepPlan::new(s.lattice(), kappa, steps, random_mask(m, seed)).unwrap();
        let out = propagator::evolve(&s, &plan).unwrap();
        prop_assert!((out.norm() - s.norm()).abs() < 1e-12 * s.norm().max(1.0));
    }

    #[test]
    fn propagation_is_linear(m in 2usize..12, kappa in -1.0f64..1.0, steps in 1usize..30, a in -2.0f64..2.0, seed in any::<u64>()) {
        let x = random_state(m, 1.0, seed);
        let y = random_state(m, 1.0, seed.wrapping_add(1));
        let plan = StepPlan::new(x.lattice(), kappa, steps, random_mask(m, seed)).unwrap();
        let combo = |p: &TwoPhotonState, q: &TwoPhotonState| {
            TwoPhotonState::from_grids(
                p.lattice(),
                p.psi_omega() * C64::new(a, 0.5) + q.psi_omega(),
                p.psi_e() * C64::new(a, 0.5) + q.psi_e(),
                p.t(),
            )
            .unwrap()
        };
        let lhs = propagator::evolve(&combo(&x, &y), &plan).unwrap();
        let rhs = combo(&propagator::evolve(&x, &plan).unwrap(), &propagator::evolve(&y, &plan).unwrap());
        prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn off_diagonal_ignores_coupling(m in 2usize..16, k1 in -3.0f64..3.0, k2 in -3.0f64..3.0, steps in 0usize..40, seed in any::<u64>()) {
        let s = random_state(m, 1.0, seed);
        let run = |k| propagator::evolve(&s, &StepPlan::full_ring(s.lattice(), k, steps).unwrap()).unwrap();
        let (a, b) = (run(k1), run(k2));
        for l in 0..m {
            for lp in (0..m).filter(|&lp| lp != l) {
                prop_assert_eq!(a.psi_omega()[[l, lp]], b.psi_omega()[[l, lp]]);
                prop_assert_eq!(a.psi_e()[[l, lp]], b.psi_e()[[l, lp]]);
            }
        }
    }

    #[test]
    fn full_traversal_without_medium_is_identity(m in 1usize..16, seed in any::<u64>()) {
        let s = random_state(m, 1.0, seed);
        let plan = StepPlan::new(s.lattice(), 0.7, m, MediumMask::empty(m)).unwrap();
        let out = propagator::evolve(&s, &plan).unwrap();
        prop_assert_eq!(out.psi_omega(), s.psi_omega());
        prop_assert_eq!(out.psi_e(), s.psi_e());
    }
}
