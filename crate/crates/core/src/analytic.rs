//! Closed-form two-photon solutions and physical-parameter conversions.
//!
//! The solutions are written in terms of an accumulated rotation angle,
//! `kappa` times the in-medium path length. For a ring filled with medium
//! that is `kappa c t`; for a finite medium entered at `z0` it is
//! `kappa (z - z0)` at depth `z - z0`. [`Geometry`] produces the angle.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::{ModeCoefficients, TwoPhotonState, C64};

/// Atomic-ensemble parameters. All rates in the same angular-frequency unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Atoms per volume.
    pub density: f64,
    pub wavelength: f64,
    /// Radiative decay rate of the excited states.
    pub gamma: f64,
    /// Detuning of the off-resonant pair of transitions.
    pub detuning: f64,
}

impl PhysicalParams {
    pub fn new(density: f64, wavelength: f64, gamma: f64, detuning: f64) -> Result<Self> {
        for (name, v) in [
            ("density", density),
            ("wavelength", wavelength),
            ("gamma", gamma),
            ("detuning", detuning),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(Self {
            density,
            wavelength,
            gamma,
            detuning,
        })
    }

    /// `g = 3 N lambda^2 gamma / (8 pi)`.
    pub fn coupling(&self) -> f64 {
        3.0 * self.density * self.wavelength * self.wavelength * self.gamma / (8.0 * PI)
    }

    /// `kappa = g / Delta`, coupling per unit length.
    pub fn kappa(&self) -> f64 {
        self.coupling() / self.detuning
    }

    /// Multi-line breakdown of the parameter arithmetic, with `c` the speed of
    /// light in the same length/time units.
    pub fn worked_report(&self, c: f64) -> String {
        let g = self.coupling();
        let kappa = self.kappa();
        format!(
            "N = {n:e}\nlambda = {l:e}\ngamma = {ga:e}\nDelta = {d:e}\n\
             g = 3 N lambda^2 gamma / (8 pi) = 3 * {n:e} * ({l:e})^2 * {ga:e} / {eight_pi:.6} = {g:.6e}\n\
             kappa = g / Delta = {g:.6e} / {d:e} = {kappa:.6e}\n\
             conversion length pi/(2 kappa) = {half:.6e}\n\
             full cycle length pi/kappa = {full:.6e}\n\
             cycle time pi/(kappa c) = {tau:.6e}\n",
            n = self.density,
            l = self.wavelength,
            ga = self.gamma,
            d = self.detuning,
            eight_pi = 8.0 * PI,
            half = conversion_length(kappa),
            full = full_cycle_length(kappa),
            tau = cycle_time(kappa, c),
        )
    }
}

pub fn derive_kappa(params: &PhysicalParams) -> f64 {
    params.kappa()
}

/// Propagation distance at which the pump intensity `cos^2(kappa z)` first vanishes.
pub fn conversion_length(kappa: f64) -> f64 {
    PI / (2.0 * kappa)
}

/// Distance for pump -> generated -> pump, where the coincident amplitude
/// has flipped sign. Reports print it next to [`conversion_length`].
pub fn full_cycle_length(kappa: f64) -> f64 {
    PI / kappa
}

/// `tau = pi / (kappa c)`.
pub fn cycle_time(kappa: f64, c: f64) -> f64 {
    PI / (kappa * c)
}

/// Where the medium is, for turning `(z, t)` into a rotation angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    /// Medium everywhere; initial-value problem.
    Ring,
    /// Medium on `[entrance, entrance + length)`; boundary-value problem.
    Medium { entrance: f64, length: f64 },
}

impl Geometry {
    pub fn angle(&self, kappa: f64, c: f64, z: f64, t: f64) -> f64 {
        match *self {
            Geometry::Ring => kappa * c * t,
            Geometry::Medium { entrance, length } => kappa * (z - entrance).clamp(0.0, length),
        }
    }
}

/// Coincident pump amplitude, `psi0(z - ct) cos(angle)`.
pub fn diag_psi_omega(psi0_retarded: C64, angle: f64) -> C64 {
    psi0_retarded * angle.cos()
}

/// Coincident generated amplitude, `-i psi0(z - ct) sin(angle)`.
pub fn diag_psi_e(psi0_retarded: C64, angle: f64) -> C64 {
    psi0_retarded * C64::new(0.0, -angle.sin())
}

/// Pump and generated intensities `(psi0 cos^2, psi0 sin^2)`.
pub fn intensity_omega(psi0_retarded: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (psi0_retarded * c * c, psi0_retarded * s * s)
}

/// Sums of `arr` over each anti-diagonal sector `k + k' = K (mod M)`,
/// indexed by storage position of `K`.
fn sector_sums(modes: &ModeCoefficients, arr: &ndarray::Array2<C64>) -> Vec<C64> {
    let lattice = modes.lattice();
    let mut sums = vec![C64::new(0.0, 0.0); lattice.cells()];
    for ((i, j), v) in arr.indexed_iter() {
        let k = lattice.mode_number(i) + lattice.mode_number(j);
        sums[lattice.mode_index(k)] += v;
    }
    sums
}

/// Projection onto states supported on the position diagonal, in mode space:
/// `(P xi)[k, k'] = (1/M) sum_{m + n = k + k' mod M} xi[m, n]`.
pub fn diagonal_projection(modes: &ModeCoefficients) -> ModeCoefficients {
    let lattice = modes.lattice();
    let m = lattice.cells();
    let project = |arr: &ndarray::Array2<C64>| {
        let sums = sector_sums(modes, arr);
        ndarray::Array2::from_shape_fn((m, m), |(i, j)| {
            let k = lattice.mode_number(i) + lattice.mode_number(j);
            sums[lattice.mode_index(k)] / m as f64
        })
    };
    let mut out = modes.clone();
    out.xi = project(&modes.xi);
    out.eta = project(&modes.eta);
    out
}

/// Mode coefficients after one full conversion cycle in the co-moving frame:
/// `xi(tau) = xi(0) - (2/M) sum_{m+n = k+k' mod M} xi_mn(0)`, and the same for
/// `eta`.
pub fn xi_after_full_cycle(xi0: &ModeCoefficients) -> ModeCoefficients {
    let p = diagonal_projection(xi0);
    let mut out = xi0.clone();
    out.xi.zip_mut_with(&p.xi, |a, b| *a -= 2.0 * b);
    out.eta.zip_mut_with(&p.eta, |a, b| *a -= 2.0 * b);
    out
}

fn diagonals(state: &TwoPhotonState) -> (Vec<C64>, Vec<C64>) {
    let m = state.lattice().cells();
    (
        (0..m).map(|l| state.psi_omega()[[l, l]]).collect(),
        (0..m).map(|l| state.psi_e()[[l, l]]).collect(),
    )
}

/// `Phi = cos(angle) diag(psi_omega) + i sin(angle) diag(psi_e)`, one angle per cell.
pub fn soliton_profile(state: &TwoPhotonState, angles: &[f64]) -> Vec<C64> {
    let (omega, e) = diagonals(state);
    omega
        .iter()
        .zip(&e)
        .zip(angles)
        .map(|((w, g), a)| w * a.cos() + g * C64::new(0.0, a.sin()))
        .collect()
}

pub fn soliton_superposition(state: &TwoPhotonState, angle: f64) -> Vec<C64> {
    soliton_profile(state, &vec![angle; state.lattice().cells()])
}

/// The orthogonal combination `sin(angle) psi_omega - i cos(angle) psi_e`,
/// which vanishes on a soliton.
pub fn soliton_complement(state: &TwoPhotonState, angles: &[f64]) -> Vec<C64> {
    let (omega, e) = diagonals(state);
    omega
        .iter()
        .zip(&e)
        .zip(angles)
        .map(|((w, g), a)| w * a.sin() - g * C64::new(0.0, a.cos()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{Envelope, Lattice};

    const ONE: C64 = C64 { re: 1.0, im: 0.0 };

    #[test]
    fn diag_formulas_at_special_angles() {
        let p = C64::new(0.7, 0.0);
        assert_eq!(diag_psi_omega(p, 0.0), p);
        assert!((diag_psi_omega(p, PI) + p).norm() < 1e-15);
        assert!(diag_psi_omega(p, PI / 2.0).norm() < 1e-16);
        assert_eq!(diag_psi_e(p, 0.0).norm(), 0.0);
        assert!((diag_psi_e(p, PI / 2.0) - C64::new(0.0, -0.7)).norm() < 1e-16);
        for a in [0.1, 0.4, 1.0, 2.0] {
            let ratio = diag_psi_e(p, a) / diag_psi_omega(p, a);
            assert!((ratio - C64::new(0.0, -a.tan())).norm() < 1e-13);
        }
    }

    #[test]
    fn intensities_sum_to_input() {
        for a in (0..50).map(|i| i as f64 * 0.137) {
            let (w, e) = intensity_omega(0.3, a);
            assert!((w + e - 0.3).abs() < 1e-16);
        }
        assert!(intensity_omega(0.3, PI / 2.0).0 < 1e-32);
        assert!((intensity_omega(0.3, PI / 4.0).0 - 0.15).abs() < 1e-16);
    }

    #[test]
    fn kappa_scaling() {
        let p = PhysicalParams::new(1e18, 795e-9, 3.6e7, 6.3e9).unwrap();
        let mut q = p;
        q.detuning *= 2.0;
        assert!((q.kappa() - p.kappa() / 2.0).abs() < 1e-12 * p.kappa());
        let mut r = p;
        r.density *= 2.0;
        assert!((r.coupling() - 2.0 * p.coupling()).abs() < 1e-12 * p.coupling());
        assert!(PhysicalParams::new(1.0, 1.0, 1.0, 0.0).is_err());
        assert!(PhysicalParams::new(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn worked_si_example() {
        // rubidium-like vapor: N = 1e18 m^-3, lambda = 795 nm,
        // gamma = 2 pi * 5.75 MHz, Delta = 2 pi * 1 GHz
        let gamma = 2.0 * PI * 5.75e6;
        let delta = 2.0 * PI * 1e9;
        let p = PhysicalParams::new(1e18, 795e-9, gamma, delta).unwrap();
        // 3 * 1e18 * (795e-9)^2 * 3.6128316e7 / 25.132741 = 2.7256078e12
        assert!((p.coupling() / 2.7256078e12 - 1.0).abs() < 1e-7);
        // kappa = 2.7256078e12 / 6.2831853e9 = 433.79396 per metre
        assert!((p.kappa() / 433.79396 - 1.0).abs() < 1e-7);
        assert!((conversion_length(p.kappa()) / 3.621065e-3 - 1.0).abs() < 1e-6);
        let report = p.worked_report(299_792_458.0);
        assert!(report.contains("kappa = g / Delta"));
    }

    #[test]
    fn lengths() {
        assert_eq!(conversion_length(0.5), PI);
        assert_eq!(full_cycle_length(0.5), 2.0 * PI);
        assert_eq!(cycle_time(0.5, 2.0), PI);
    }

    #[test]
    fn geometry_angles() {
        assert_eq!(Geometry::Ring.angle(0.2, 1.0, 100.0, 5.0), 1.0);
        let g = Geometry::Medium {
            entrance: 10.0,
            length: 5.0,
        };
        assert_eq!(g.angle(0.2, 1.0, 8.0, 99.0), 0.0);
        assert!((g.angle(0.2, 1.0, 12.0, 0.0) - 0.4).abs() < 1e-15);
        assert!((g.angle(0.2, 1.0, 40.0, 0.0) - 1.0).abs() < 1e-15);
    }

    /// Second difference along the characteristic `z - ct = const`.
    fn characteristic_second_difference(f: &dyn Fn(f64, f64) -> C64, z: f64, t: f64, c: f64, h: f64) -> C64 {
        (f(z + c * h, t + h) - 2.0 * f(z, t) + f(z - c * h, t - h)) / (h * h)
    }

    #[test]
    fn closed_forms_solve_the_transport_equation() {
        let (kappa, c) = (0.35, 1.3);
        let psi0 = |x: f64| C64::new((-(x - 2.0).powi(2) / 3.0).exp(), 0.0);
        for geometry in [
            Geometry::Ring,
            Geometry::Medium {
                entrance: -50.0,
                length: 100.0,
            },
        ] {
            let omega = |z: f64, t: f64| diag_psi_omega(psi0(z - c * t), geometry.angle(kappa, c, z, t));
            let e = |z: f64, t: f64| diag_psi_e(psi0(z - c * t), geometry.angle(kappa, c, z, t));
            for &(z, t) in &[(1.0, 0.5), (3.0, 2.0), (-1.0, 1.5)] {
                let mut errs = Vec::new();
                for h in [1e-2, 5e-3] {
                    let lhs = characteristic_second_difference(&omega, z, t, c, h);
                    let rhs = -kappa * kappa * c * c * omega(z, t);
                    let lhs_e = characteristic_second_difference(&e, z, t, c, h);
                    let rhs_e = -kappa * kappa * c * c * e(z, t);
                    errs.push(((lhs - rhs).norm(), (lhs_e - rhs_e).norm()));
                }
                assert!(errs[1].0 < 1e-5 && errs[1].1 < 1e-5, "{errs:?}");
                // O(h^2): halving h shrinks the error about fourfold
                if errs[0].0 > 1e-8 {
                    let ratio = errs[0].0 / errs[1].0;
                    assert!((3.0..5.0).contains(&ratio), "ratio {ratio}");
                }
            }
        }
    }

    fn random_modes(m: usize, seed: u64) -> ModeCoefficients {
        let mut x = seed;
        let mut next = || {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((x >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let lattice = Lattice::with_cells(m).unwrap();
        let mut modes = ModeCoefficients::zeros(lattice);
        modes.xi.mapv_inplace(|_| C64::new(next(), next()));
        modes.eta.mapv_inplace(|_| C64::new(next(), next()));
        modes
    }

    #[test]
    fn single_entry_mixes_onto_its_sector() {
        let lattice = Lattice::with_cells(5).unwrap();
        let mut modes = ModeCoefficients::zeros(lattice);
        // (k, k') = (1, 2): sector K = 3 = -2 (mod 5)
        let (i, j) = (lattice.mode_index(1), lattice.mode_index(2));
        modes.xi[[i, j]] = ONE;
        let out = xi_after_full_cycle(&modes);
        for ((a, b), v) in out.xi.indexed_iter() {
            let k = lattice.wrap_mode(lattice.mode_number(a) + lattice.mode_number(b));
            let expected = if (a, b) == (i, j) {
                1.0 - 2.0 / 5.0
            } else if k == -2 {
                -2.0 / 5.0
            } else {
                0.0
            };
            assert!((v - C64::new(expected, 0.0)).norm() < 1e-15, "({a},{b})");
        }
    }

    #[test]
    fn soliton_input_just_flips_sign() {
        let lattice = Lattice::with_cells(9).unwrap();
        let g = Envelope::gaussian(lattice, 4.0, 1.5).unwrap();
        let s = TwoPhotonState::diagonal_entangled(&g).unwrap();
        let modes = s.to_modes();
        let out = xi_after_full_cycle(&modes);
        let mut neg = modes.clone();
        neg.xi.mapv_inplace(|v| -v);
        assert!(out.max_abs_diff(&neg) < 1e-15);
    }

    #[test]
    fn full_cycle_map_is_a_norm_preserving_involution() {
        for seed in 1..5 {
            let m = random_modes(7, seed);
            let once = xi_after_full_cycle(&m);
            let twice = xi_after_full_cycle(&once);
            assert!(twice.max_abs_diff(&m) < 1e-14);
            assert!((once.norm() - m.norm()).abs() < 1e-13);
        }
    }

    #[test]
    fn soliton_superposition_values() {
        let lattice = Lattice::with_cells(9).unwrap();
        let g = Envelope::gaussian(lattice, 4.0, 1.5).unwrap();
        let s = TwoPhotonState::diagonal_entangled(&g).unwrap();
        let phi = soliton_superposition(&s, 0.0);
        for l in 0..9 {
            assert_eq!(phi[l], s.psi_omega()[[l, l]]);
        }
        // closed forms at angle a give back phi0 and a vanishing complement
        let a = 0.8;
        let m = 9;
        let mut w = ndarray::Array2::zeros((m, m));
        let mut e = ndarray::Array2::zeros((m, m));
        for l in 0..m {
            let p = s.psi_omega()[[l, l]];
            w[[l, l]] = diag_psi_omega(p, a);
            e[[l, l]] = diag_psi_e(p, a);
        }
        let evolved = TwoPhotonState::from_grids(lattice, w, e, 0.0).unwrap();
        let phi = soliton_superposition(&evolved, a);
        let comp = soliton_complement(&evolved, &vec![a; m]);
        for l in 0..m {
            assert!((phi[l] - s.psi_omega()[[l, l]]).norm() < 1e-16);
            assert!(comp[l].norm() < 1e-16);
        }
    }
}
