//! Brute-force many-body oracle on a truncated Fock space.
//!
//! Four bosonic species live on each of at most [`MAX_CELLS`] cells with
//! unit-commutator cell operators `b_{s,l}`. The interaction is
//!
//! ```text
//! H_int = kappa c sum_l (b+_{O1,l} b+_{O2,l} b_{E1,l} b_{E2,l} + h.c.) Lambda_l
//! ```
//!
//! where `Lambda_l` is the Moore-Penrose pseudoinverse of the saturating
//! denominator `n_{O1,l} + n_{E1,l}`: `1/n` on its `n > 0` eigenspaces and
//! zero on the kernel, where the numerator annihilates anyway. The kinetic
//! term is the one-body operator with mode frequencies `omega_k`, which moves
//! every photon exactly one cell in `dz / c`.
//!
//! Nothing here assumes the two-photon reduction: the basis includes the mixed
//! sectors (one pump photon with one generated photon), and leakage into them
//! is measured rather than ruled out.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::lattice::{Lattice, TwoPhotonState, C64};
use crate::propagator::{self, MediumMask};

pub const MAX_CELLS: usize = 5;
/// Total photon cap across both pairs.
pub const MAX_PHOTONS: usize = 4;
pub const MAX_DIMENSION: usize = 4096;
/// Largest accepted `max |H - H^dagger|`.
pub const HERMITICITY_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Species {
    Omega1 = 0,
    Omega2 = 1,
    E1 = 2,
    E2 = 3,
}

impl Species {
    pub const ALL: [Species; 4] = [Species::Omega1, Species::Omega2, Species::E1, Species::E2];
}

/// Occupation-number basis with fixed `N1 = sum(n_O1 + n_E1)` and
/// `N2 = sum(n_O2 + n_E2)`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    cells: usize,
    n1: usize,
    n2: usize,
    states: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

fn slot(cell: usize, species: Species) -> usize {
    4 * cell + species as usize
}

/// All multisets of size `n` drawn from `slots`, as non-decreasing index lists.
fn multisets(slots: &[usize], n: usize) -> Vec<Vec<usize>> {
    fn go(slots: &[usize], n: usize, from: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == n {
            out.push(cur.clone());
            return;
        }
        for i in from..slots.len() {
            cur.push(slots[i]);
            go(slots, n, i, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(slots, n, 0, &mut Vec::new(), &mut out);
    out
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

impl FockBasis {
    pub fn new(cells: usize, n1: usize, n2: usize) -> Result<Self> {
        if cells == 0 || cells > MAX_CELLS {
            return Err(Error::CapacityExceeded(format!(
                "Fock oracle supports 1..={MAX_CELLS} cells, got {cells}"
            )));
        }
        if n1 + n2 > MAX_PHOTONS {
            return Err(Error::CapacityExceeded(format!(
                "at most {MAX_PHOTONS} photons in total, got {}",
                n1 + n2
            )));
        }
        let dim = binomial(2 * cells + n1 - 1, n1) * binomial(2 * cells + n2 - 1, n2);
        if dim > MAX_DIMENSION {
            return Err(Error::CapacityExceeded(format!(
                "basis dimension {dim} exceeds {MAX_DIMENSION}"
            )));
        }
        let first: Vec<usize> = (0..cells)
            .flat_map(|l| [slot(l, Species::Omega1), slot(l, Species::E1)])
            .collect();
        let second: Vec<usize> = (0..cells)
            .flat_map(|l| [slot(l, Species::Omega2), slot(l, Species::E2)])
            .collect();
        let mut states = Vec::with_capacity(dim);
        for a in multisets(&first, n1) {
            for b in multisets(&second, n2) {
                let mut occ = vec![0u8; 4 * cells];
                for &s in a.iter().chain(&b) {
                    occ[s] += 1;
                }
                states.push(occ);
            }
        }
        let index = states.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Ok(Self {
            cells,
            n1,
            n2,
            states,
            index,
        })
    }

    /// One photon in each pair: dimension `(2M)^2`.
    pub fn two_photon(cells: usize) -> Result<Self> {
        Self::new(cells, 1, 1)
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn photons(&self) -> (usize, usize) {
        (self.n1, self.n2)
    }

    pub fn state(&self, i: usize) -> &[u8] {
        &self.states[i]
    }

    pub fn index_of(&self, occupations: &[u8]) -> Option<usize> {
        self.index.get(occupations).copied()
    }

    pub fn occupation(&self, i: usize, cell: usize, species: Species) -> u8 {
        self.states[i][slot(cell, species)]
    }

    /// Basis index of one photon of `a` in cell `la` and one of `b` in `lb`.
    pub fn pair_index(&self, a: Species, la: usize, b: Species, lb: usize) -> Option<usize> {
        let mut occ = vec![0u8; 4 * self.cells];
        occ[slot(la, a)] += 1;
        occ[slot(lb, b)] += 1;
        self.index_of(&occ)
    }

    /// `b+_{s1} b+_{s2} b_{s3} b_{s4}` at `cell` applied to basis state `i`.
    fn apply_string(&self, i: usize, cell: usize, create: [Species; 2], annihilate: [Species; 2]) -> Option<(usize, f64)> {
        let mut occ = self.states[i].clone();
        let mut amp = 1.0;
        for s in annihilate {
            let n = &mut occ[slot(cell, s)];
            if *n == 0 {
                return None;
            }
            amp *= (*n as f64).sqrt();
            *n -= 1;
        }
        for s in create {
            let n = &mut occ[slot(cell, s)];
            *n += 1;
            amp *= (*n as f64).sqrt();
        }
        self.index_of(&occ).map(|j| (j, amp))
    }

    /// Eigenvalue of `n_{O1,l} + n_{E1,l}` on basis state `i`.
    fn denominator(&self, i: usize, cell: usize) -> u8 {
        self.occupation(i, cell, Species::Omega1) + self.occupation(i, cell, Species::E1)
    }

    /// Eigenvalue of `Lambda_l` on basis state `i`.
    pub fn lambda(&self, i: usize, cell: usize) -> f64 {
        match self.denominator(i, cell) {
            0 => 0.0,
            n => 1.0 / n as f64,
        }
    }

    /// True when the local numerator does not annihilate basis state `i`.
    fn numerator_acts(&self, i: usize, cell: usize) -> bool {
        let o = |s| self.occupation(i, cell, s) > 0;
        (o(Species::Omega1) && o(Species::Omega2)) || (o(Species::E1) && o(Species::E2))
    }

    /// Numerator `b+_{O1} b+_{O2} b_{E1} b_{E2} + h.c.` at `cell` as a dense matrix.
    pub fn numerator(&self, cell: usize) -> DMatrix<C64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for j in 0..d {
            for (create, annihilate) in [
                ([Species::Omega1, Species::Omega2], [Species::E1, Species::E2]),
                ([Species::E1, Species::E2], [Species::Omega1, Species::Omega2]),
            ] {
                if let Some((i, amp)) = self.apply_string(j, cell, create, annihilate) {
                    m[(i, j)] += C64::new(amp, 0.0);
                }
            }
        }
        m
    }

    /// Denominator `n_{O1} + n_{E1}` at `cell` as a dense (diagonal) matrix.
    pub fn denominator_matrix(&self, cell: usize) -> DMatrix<C64> {
        DMatrix::from_diagonal(&DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|i| C64::new(self.denominator(i, cell) as f64, 0.0)),
        ))
    }
}

/// Dense hermitian operator on a [`FockBasis`].
#[derive(Debug, Clone)]
pub struct HamiltonianMatrix {
    matrix: DMatrix<C64>,
}

impl HamiltonianMatrix {
    /// Wraps `matrix`, rejecting it unless hermitian to [`HERMITICITY_TOLERANCE`].
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        let h = Self { matrix };
        let err = h.hermiticity_error();
        if err >= HERMITICITY_TOLERANCE || !err.is_finite() {
            return Err(Error::NonHermitian(err));
        }
        Ok(h)
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: DMatrix::zeros(dim, dim),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint())
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        Self::new(&self.matrix + &other.matrix)
    }
}

/// Interaction Hamiltonian with medium in every cell.
pub fn build_interaction(basis: &FockBasis, kappa: f64, c: f64) -> Result<HamiltonianMatrix> {
    build_interaction_masked(basis, kappa, c, &MediumMask::full(basis.cells()))
}

/// Interaction Hamiltonian restricted to the active cells of `mask`.
pub fn build_interaction_masked(basis: &FockBasis, kappa: f64, c: f64, mask: &MediumMask) -> Result<HamiltonianMatrix> {
    if mask.len() != basis.cells() {
        return Err(Error::InvalidParameter(format!(
            "mask covers {} cells, basis has {}",
            mask.len(),
            basis.cells()
        )));
    }
    let d = basis.dim();
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        for cell in (0..basis.cells()).filter(|&l| mask.is_active(l)) {
            // Lambda acts first; numerator and denominator commute, so the order is immaterial
            let lambda = basis.lambda(j, cell);
            if lambda == 0.0 {
                continue;
            }
            for (create, annihilate) in [
                ([Species::Omega1, Species::Omega2], [Species::E1, Species::E2]),
                ([Species::E1, Species::E2], [Species::Omega1, Species::Omega2]),
            ] {
                if let Some((i, amp)) = basis.apply_string(j, cell, create, annihilate) {
                    h[(i, j)] += C64::new(kappa * c * amp * lambda, 0.0);
                }
            }
        }
    }
    HamiltonianMatrix::new(h)
}

/// One-body cell hopping matrix `h[l, l'] = (1/M) sum_k omega_k exp(2 pi i k (l - l') / M)`.
pub fn single_photon_kinetic(lattice: Lattice) -> DMatrix<C64> {
    let m = lattice.cells();
    DMatrix::from_fn(m, m, |l, lp| {
        (0..m)
            .map(|i| {
                let k = lattice.mode_number(i);
                let arg = 2.0 * PI * (k * (l as i64 - lp as i64)) as f64 / m as f64;
                C64::from_polar(lattice.mode_frequency(k) / m as f64, arg)
            })
            .sum()
    })
}

/// Free propagation of all four species.
pub fn build_kinetic(basis: &FockBasis, lattice: Lattice) -> Result<HamiltonianMatrix> {
    if lattice.cells() != basis.cells() {
        return Err(Error::InvalidParameter(format!(
            "lattice has {} cells, basis has {}",
            lattice.cells(),
            basis.cells()
        )));
    }
    let hop = single_photon_kinetic(lattice);
    let d = basis.dim();
    let m = basis.cells();
    let mut h = DMatrix::zeros(d, d);
    for j in 0..d {
        let occ = basis.state(j);
        for s in Species::ALL {
            for from in 0..m {
                let n_from = occ[slot(from, s)];
                if n_from == 0 {
                    continue;
                }
                h[(j, j)] += hop[(from, from)] * n_from as f64;
                for to in (0..m).filter(|&to| to != from) {
                    let mut next = occ.to_vec();
                    next[slot(from, s)] -= 1;
                    next[slot(to, s)] += 1;
                    let amp = (n_from as f64 * next[slot(to, s)] as f64).sqrt();
                    let i = basis.index_of(&next).expect("hopping stays inside the sector");
                    h[(i, j)] += hop[(to, from)] * amp;
                }
            }
        }
    }
    HamiltonianMatrix::new(h)
}

/// Hermitian eigendecomposition, reusable for many evolution times.
#[derive(Debug, Clone)]
pub struct Evolution {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<C64>,
}

impl Evolution {
    pub fn new(h: &HamiltonianMatrix) -> Result<Self> {
        let err = h.hermiticity_error();
        if err >= HERMITICITY_TOLERANCE {
            return Err(Error::NonHermitian(err));
        }
        let eig = SymmetricEigen::new(h.matrix().clone());
        Ok(Self {
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `exp(-i H t)` as a dense matrix.
    pub fn unitary(&self, t: f64) -> DMatrix<C64> {
        let phases = self.eigenvalues.map(|e| C64::from_polar(1.0, -e * t));
        let mut scaled = self.eigenvectors.clone();
        for (mut col, p) in scaled.column_iter_mut().zip(phases.iter()) {
            col *= *p;
        }
        scaled * self.eigenvectors.adjoint()
    }

    pub fn apply(&self, state: &DVector<C64>, t: f64) -> DVector<C64> {
        let coeffs = self.eigenvectors.adjoint() * state;
        let phased = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(self.eigenvalues.iter()).map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
        );
        &self.eigenvectors * phased
    }
}

/// `exp(-i H t) state0`.
pub fn evolve_exact(h: &HamiltonianMatrix, state0: &DVector<C64>, t: f64) -> Result<DVector<C64>> {
    if state0.len() != h.dim() {
        return Err(Error::InvalidInput(format!(
            "state has dimension {}, operator {}",
            state0.len(),
            h.dim()
        )));
    }
    Ok(Evolution::new(h)?.apply(state0, t))
}

/// Embeds a lattice two-photon state into the one-photon-per-pair basis.
/// Amplitudes pick up a factor `dz` (cell operators are unit normalized).
pub fn embed(basis: &FockBasis, state: &TwoPhotonState) -> Result<DVector<C64>> {
    let m = state.lattice().cells();
    if basis.photons() != (1, 1) || basis.cells() != m {
        return Err(Error::InvalidInput(
            "embedding needs a one-photon-per-pair basis on the same lattice".into(),
        ));
    }
    let dz = state.lattice().dz();
    let mut v = DVector::zeros(basis.dim());
    for l in 0..m {
        for lp in 0..m {
            let i = basis.pair_index(Species::Omega1, l, Species::Omega2, lp).expect("in basis");
            v[i] = state.psi_omega()[[l, lp]] * dz;
            let i = basis.pair_index(Species::E1, l, Species::E2, lp).expect("in basis");
            v[i] = state.psi_e()[[l, lp]] * dz;
        }
    }
    Ok(v)
}

/// Largest amplitude on a mixed-sector basis state (one pump and one
/// generated photon).
pub fn mixed_sector_leakage(basis: &FockBasis, v: &DVector<C64>) -> f64 {
    (0..basis.dim())
        .filter(|&i| {
            let total = |s| (0..basis.cells()).map(|l| basis.occupation(i, l, s) as u32).sum::<u32>();
            (total(Species::Omega1) > 0 && total(Species::E2) > 0) || (total(Species::E1) > 0 && total(Species::Omega2) > 0)
        })
        .map(|i| v[i].norm())
        .fold(0.0, f64::max)
}

/// Worst cell of `||(Lambda_l - 1)|phi>||`, restricted to the basis states on
/// which the cell-`l` numerator acts.
pub fn lambda_identity_residual(basis: &FockBasis, v: &DVector<C64>) -> f64 {
    (0..basis.cells())
        .map(|l| {
            (0..basis.dim())
                .filter(|&i| basis.numerator_acts(i, l))
                .map(|i| ((basis.lambda(i, l) - 1.0) * v[i].norm()).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max)
}

/// Per-cell expectations of the four transported operators.
pub fn invariants(basis: &FockBasis, v: &DVector<C64>) -> [Vec<f64>; 4] {
    let m = basis.cells();
    let mut q: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; m]);
    for i in 0..basis.dim() {
        let p = v[i].norm_sqr();
        if p == 0.0 {
            continue;
        }
        let [q1, q2, q3, _] = &mut q;
        for (l, ((a, b), d)) in q1.iter_mut().zip(q2.iter_mut()).zip(q3.iter_mut()).enumerate() {
            let n = |s| basis.occupation(i, l, s) as f64;
            *a += p * (n(Species::Omega1) + n(Species::E1));
            *b += p * (n(Species::Omega2) + n(Species::E2));
            *d += p * (n(Species::Omega1) - n(Species::Omega2));
        }
    }
    for j in 0..basis.dim() {
        if v[j].norm_sqr() == 0.0 {
            continue;
        }
        for (l, q4) in q[3].iter_mut().enumerate() {
            for (create, annihilate) in [
                ([Species::Omega1, Species::Omega2], [Species::E1, Species::E2]),
                ([Species::E1, Species::E2], [Species::Omega1, Species::Omega2]),
            ] {
                if let Some((i, amp)) = basis.apply_string(j, l, create, annihilate) {
                    *q4 += (v[i].conj() * v[j] * amp).re;
                }
            }
        }
    }
    q
}

/// Outcome of [`crosscheck`]. Failures are carried as numbers, never as errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CrosscheckReport {
    pub cells: usize,
    pub dimension: usize,
    pub steps: usize,
    /// Largest `|fock amplitude - dz * psi|` over all steps and basis states.
    pub max_deviation: f64,
    pub max_leakage: f64,
    pub lambda_residual: f64,
    /// Worst per-cell transport residual of the four invariants.
    pub invariant_residual: f64,
    /// Largest deviation of `exp(-i H_kin dz/c)` from the one-cell shift.
    pub kinetic_shift_error: f64,
    pub hermiticity_error: f64,
    pub max_norm_drift: f64,
    pub runtime_seconds: f64,
}

/// The one-photon-per-pair shift permutation, as a matrix on `basis`.
fn shift_permutation(basis: &FockBasis) -> DMatrix<C64> {
    let m = basis.cells();
    let d = basis.dim();
    let mut p = DMatrix::zeros(d, d);
    for j in 0..d {
        let occ = basis.state(j);
        let mut next = vec![0u8; occ.len()];
        for l in 0..m {
            for s in Species::ALL {
                next[slot((l + 1) % m, s)] = occ[slot(l, s)];
            }
        }
        p[(basis.index_of(&next).expect("shift stays in basis"), j)] = C64::new(1.0, 0.0);
    }
    p
}

/// Runs the Fock evolution and the split-step propagator side by side on the
/// scenario in `config` (at most [`MAX_CELLS`] cells). Each whole-cell step
/// is `exp(-i H_int dt) exp(-i H_kin dt)`, the same split as the propagator.
pub fn crosscheck(config: &SimConfig) -> Result<CrosscheckReport> {
    let started = Instant::now();
    let lattice = config.lattice()?;
    let basis = FockBasis::two_photon(lattice.cells())?;
    let plan = config.plan()?;
    let state0 = config.initial_state()?;

    let h_int = build_interaction_masked(&basis, config.kappa, lattice.c(), &plan.mask)?;
    let h_kin = build_kinetic(&basis, lattice)?;
    let hermiticity_error = h_int.hermiticity_error().max(h_kin.hermiticity_error());
    let dt = plan.dt;
    let u_kin = Evolution::new(&h_kin)?.unitary(dt);
    let u_int = Evolution::new(&h_int)?.unitary(dt);
    let kinetic_shift_error = (&u_kin - shift_permutation(&basis))
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max);
    let u_step = &u_int * &u_kin;

    let mut fock = embed(&basis, &state0)?;
    let norm0 = fock.norm_squared();
    let mut prev_q = invariants(&basis, &fock);
    let mut report = CrosscheckReport {
        cells: lattice.cells(),
        dimension: basis.dim(),
        steps: plan.n_steps,
        max_deviation: 0.0,
        max_leakage: mixed_sector_leakage(&basis, &fock),
        lambda_residual: lambda_identity_residual(&basis, &fock),
        invariant_residual: 0.0,
        kinetic_shift_error,
        hermiticity_error,
        max_norm_drift: 0.0,
        runtime_seconds: 0.0,
    };
    let mut lattice_state = state0;
    let mut one = plan.clone();
    one.n_steps = 1;
    for _ in 0..plan.n_steps {
        fock = &u_step * &fock;
        lattice_state = propagator::step(&lattice_state, &one)?;
        let expected = embed(&basis, &lattice_state)?;
        report.max_deviation = report.max_deviation.max(
            fock.iter()
                .zip(expected.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max),
        );
        report.max_leakage = report.max_leakage.max(mixed_sector_leakage(&basis, &fock));
        report.lambda_residual = report.lambda_residual.max(lambda_identity_residual(&basis, &fock));
        report.max_norm_drift = report.max_norm_drift.max((fock.norm_squared() - norm0).abs());
        let q = invariants(&basis, &fock);
        let m = lattice.cells();
        for (now, before) in q.iter().zip(prev_q.iter()) {
            for l in 0..m {
                let r = (now[l] - before[(l + m - 1) % m]).abs();
                report.invariant_residual = report.invariant_residual.max(r);
            }
        }
        prev_q = q;
    }
    report.runtime_seconds = started.elapsed().as_secs_f64();
    Ok(report)
}
