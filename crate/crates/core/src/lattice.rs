//! Periodic cell lattice, single-photon envelopes, the two-photon state and
//! the cell <-> mode transforms.
//!
//! Cells are indexed `l = 0..M`. Mode numbers run over `k = kmin..kmin+M`
//! with `kmin = -(M/2)`, i.e. `{-N..N}` for odd `M = 2N+1` and
//! `{-M/2..M/2-1}` for even `M`. Mode arrays are stored in ascending `k`
//! order, so `xi[[i, j]]` holds the coefficient of `(kmin+i, kmin+j)`.
//!
//! The transform pair is
//!
//! ```text
//! psi[l, l'] = (1/L)   sum_{k,k'} xi[k, k'] exp(+2 pi i (k l + k' l') / M)
//! xi[k, k']  = (dz/M)  sum_{l,l'} psi[l, l'] exp(-2 pi i (k l + k' l') / M)
//! ```
//!
//! with `L = M dz`, which makes `sum |xi|^2 = sum |psi|^2 dz^2` exactly.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{FftDirection, FftPlanner};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Periodic ring of `M` cells of length `dz`, traversed at speed `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice {
    cells: usize,
    dz: f64,
    c: f64,
}

impl Lattice {
    pub fn new(cells: usize, dz: f64, c: f64) -> Result<Self> {
        if cells == 0 {
            return Err(Error::InvalidLattice("number of cells must be at least 1".into()));
        }
        if !(dz > 0.0 && dz.is_finite()) {
            return Err(Error::InvalidLattice(format!("cell length must be positive, got {dz}")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidLattice(format!("propagation speed must be positive, got {c}")));
        }
        if cells.is_multiple_of(2) {
            log::warn!(
                "even cell count M = {cells}: mode numbers run over {{{}..{}}} instead of a symmetric range",
                -(cells as i64 / 2),
                cells as i64 / 2 - 1
            );
        }
        Ok(Self { cells, dz, c })
    }

    /// Dimensionless lattice with `dz = c = 1`.
    pub fn with_cells(cells: usize) -> Result<Self> {
        Self::new(cells, 1.0, 1.0)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// Quantization length `L = M dz`.
    pub fn length(&self) -> f64 {
        self.cells as f64 * self.dz
    }

    /// Time to cross one cell, `dz / c`.
    pub fn cell_time(&self) -> f64 {
        self.dz / self.c
    }

    pub fn min_mode(&self) -> i64 {
        -((self.cells / 2) as i64)
    }

    pub fn mode_number(&self, index: usize) -> i64 {
        self.min_mode() + index as i64
    }

    /// Folds an arbitrary integer into the mode range `kmin..kmin+M`.
    pub fn wrap_mode(&self, k: i64) -> i64 {
        let m = self.cells as i64;
        (k - self.min_mode()).rem_euclid(m) + self.min_mode()
    }

    /// Storage index of mode number `k` (taken modulo `M`).
    pub fn mode_index(&self, k: i64) -> usize {
        (self.wrap_mode(k) - self.min_mode()) as usize
    }

    /// Free-propagation frequency `omega_k = 2 pi k c / L`.
    pub fn mode_frequency(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 * self.c / self.length()
    }

    pub fn wrap_cell(&self, l: i64) -> usize {
        l.rem_euclid(self.cells as i64) as usize
    }

    /// Minimum-image distance between two (possibly fractional) cell positions.
    pub fn periodic_distance(&self, a: f64, b: f64) -> f64 {
        let m = self.cells as f64;
        let d = (a - b).rem_euclid(m);
        d.min(m - d)
    }

    /// Whole cells travelled in time `t`, or `None` when `t` is not cell aligned.
    pub fn cells_travelled(&self, t: f64) -> Option<i64> {
        let s = t / self.cell_time();
        let r = s.round();
        ((s - r).abs() <= 1e-9 * s.abs().max(1.0)).then_some(r as i64)
    }
}

/// Single-photon amplitude per cell, normalized to `sum |f0|^2 dz = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    lattice: Lattice,
    amplitudes: Vec<C64>,
}

impl Envelope {
    /// Normalizes `amplitudes` onto `lattice`.
    pub fn from_amplitudes(lattice: Lattice, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != lattice.cells() {
            return Err(Error::InvalidInput(format!(
                "envelope has {} cells, lattice has {}",
                amplitudes.len(),
                lattice.cells()
            )));
        }
        if amplitudes.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidInput("envelope contains non-finite amplitudes".into()));
        }
        let norm2: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * lattice.dz();
        if norm2 == 0.0 {
            return Err(Error::InvalidInput("envelope is identically zero".into()));
        }
        let scale = norm2.sqrt().recip();
        Ok(Self {
            lattice,
            amplitudes: amplitudes.into_iter().map(|a| a * scale).collect(),
        })
    }

    /// Gaussian `exp(-d^2 / (2 width^2))` with `d` the periodic distance to
    /// `center` (both in cells). Very narrow widths degrade to a point
    /// envelope on the nearest cell(s) instead of underflowing.
    pub fn gaussian(lattice: Lattice, center: f64, width: f64) -> Result<Self> {
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {width}")));
        }
        let m = lattice.cells() as f64;
        if !(0.0..m).contains(&center) {
            return Err(Error::InvalidParameter(format!(
                "gaussian center {center} outside [0, {m})"
            )));
        }
        // log-domain so the maximum stays exactly 1 before normalization
        let exponents: Vec<f64> = (0..lattice.cells())
            .map(|l| {
                let d = lattice.periodic_distance(l as f64, center);
                -d * d / (2.0 * width * width)
            })
            .collect();
        let top = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let amplitudes = exponents
            .into_iter()
            .map(|e| C64::new((e - top).exp(), 0.0))
            .collect();
        Self::from_amplitudes(lattice, amplitudes)
    }

    /// All amplitude in one cell: `f0[cell] = 1/sqrt(dz)`.
    pub fn point(lattice: Lattice, cell: usize) -> Result<Self> {
        if cell >= lattice.cells() {
            return Err(Error::InvalidParameter(format!(
                "point cell {cell} outside lattice of {} cells",
                lattice.cells()
            )));
        }
        let mut amplitudes = vec![C64::new(0.0, 0.0); lattice.cells()];
        amplitudes[cell] = C64::new(1.0, 0.0);
        Self::from_amplitudes(lattice, amplitudes)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>() * self.lattice.dz()
    }
}

/// Two-photon sector state: `psi_omega[l, l']` is the amplitude for the
/// first pump photon in cell `l` and the second in `l'`; `psi_e` is the same
/// for the generated pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonState {
    lattice: Lattice,
    psi_omega: Array2<C64>,
    psi_e: Array2<C64>,
    t: f64,
}

impl TwoPhotonState {
    /// Builds a state from raw grids. No normalization is applied.
    pub fn from_grids(lattice: Lattice, psi_omega: Array2<C64>, psi_e: Array2<C64>, t: f64) -> Result<Self> {
        let m = lattice.cells();
        for (name, g) in [("psi_omega", &psi_omega), ("psi_e", &psi_e)] {
            if g.dim() != (m, m) {
                return Err(Error::InvalidInput(format!(
                    "{name} has shape {:?}, expected ({m}, {m})",
                    g.dim()
                )));
            }
        }
        Ok(Self {
            lattice,
            psi_omega,
            psi_e,
            t,
        })
    }

    /// `psi_omega[l, l'] = e1[l] e2[l']`, generated fields empty.
    pub fn separable(e1: &Envelope, e2: &Envelope) -> Result<Self> {
        if e1.lattice() != e2.lattice() {
            return Err(Error::InvalidInput("envelopes live on different lattices".into()));
        }
        let lattice = e1.lattice();
        let m = lattice.cells();
        let (a, b) = (e1.amplitudes(), e2.amplitudes());
        let psi_omega = Array2::from_shape_fn((m, m), |(l, lp)| a[l] * b[lp]);
        Self::from_grids(lattice, psi_omega, Array2::zeros((m, m)), 0.0)
    }

    /// Entangled pair confined to the diagonal: `psi_omega[l, l] = phi0[l] / sqrt(dz)`.
    pub fn diagonal_entangled(phi0: &Envelope) -> Result<Self> {
        let lattice = phi0.lattice();
        let m = lattice.cells();
        let scale = lattice.dz().sqrt().recip();
        let mut psi_omega = Array2::zeros((m, m));
        for (l, a) in phi0.amplitudes().iter().enumerate() {
            psi_omega[[l, l]] = a * scale;
        }
        let state = Self::from_grids(lattice, psi_omega, Array2::zeros((m, m)), 0.0)?;
        if state.norm() == 0.0 {
            return Err(Error::InvalidInput("diagonal envelope is identically zero".into()));
        }
        Ok(state)
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn psi_omega(&self) -> &Array2<C64> {
        &self.psi_omega
    }

    pub fn psi_e(&self) -> &Array2<C64> {
        &self.psi_e
    }

    pub(crate) fn grids_mut(&mut self) -> (&mut Array2<C64>, &mut Array2<C64>) {
        (&mut self.psi_omega, &mut self.psi_e)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `sum (|psi_omega|^2 + |psi_e|^2) dz^2`.
    pub fn norm(&self) -> f64 {
        let dz2 = self.lattice.dz().powi(2);
        let s: f64 = self
            .psi_omega
            .iter()
            .chain(self.psi_e.iter())
            .map(|a| a.norm_sqr())
            .sum();
        s * dz2
    }

    /// Rescales both grids to unit norm.
    pub fn normalized(mut self) -> Result<Self> {
        let n = self.norm();
        if n <= 0.0 || !n.is_finite() {
            return Err(Error::InvalidInput(format!("cannot normalize state with norm {n}")));
        }
        let s = n.sqrt().recip();
        self.psi_omega.mapv_inplace(|a| a * s);
        self.psi_e.mapv_inplace(|a| a * s);
        Ok(self)
    }

    /// Exchanges the pump and generated pairs.
    pub fn swap_species(&self) -> Self {
        Self {
            lattice: self.lattice,
            psi_omega: self.psi_e.clone(),
            psi_e: self.psi_omega.clone(),
            t: self.t,
        }
    }

    /// Continuum L2 distance `sqrt(sum |delta|^2 dz^2)` over both grids.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let dz2 = self.lattice.dz().powi(2);
        let s: f64 = self
            .psi_omega
            .iter()
            .zip(other.psi_omega.iter())
            .chain(self.psi_e.iter().zip(other.psi_e.iter()))
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        (s * dz2).sqrt()
    }

    /// Largest entrywise deviation over both grids.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.psi_omega
            .iter()
            .zip(other.psi_omega.iter())
            .chain(self.psi_e.iter().zip(other.psi_e.iter()))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_modes(&self) -> ModeCoefficients {
        to_modes(self)
    }
}

/// Mode-space coefficients `xi` (pump pair) and `eta` (generated pair).
#[derive(Debug, Clone, PartialEq)]
pub struct ModeCoefficients {
    lattice: Lattice,
    pub xi: Array2<C64>,
    pub eta: Array2<C64>,
    pub t: f64,
}

impl ModeCoefficients {
    pub fn new(lattice: Lattice, xi: Array2<C64>, eta: Array2<C64>, t: f64) -> Result<Self> {
        let m = lattice.cells();
        if xi.dim() != (m, m) || eta.dim() != (m, m) {
            return Err(Error::InvalidInput(format!(
                "mode arrays must be {m}x{m}, got {:?} and {:?}",
                xi.dim(),
                eta.dim()
            )));
        }
        Ok(Self { lattice, xi, eta, t })
    }

    pub fn zeros(lattice: Lattice) -> Self {
        let m = lattice.cells();
        Self {
            lattice,
            xi: Array2::zeros((m, m)),
            eta: Array2::zeros((m, m)),
            t: 0.0,
        }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn norm(&self) -> f64 {
        self.xi.iter().chain(self.eta.iter()).map(|a| a.norm_sqr()).sum()
    }

    /// Removes the transport phase of a shift by `cells` whole cells, i.e.
    /// maps to the frame co-moving with the pulses.
    pub fn comoving(&self, cells: i64) -> Self {
        let m = self.lattice.cells();
        let phase = |i: usize, j: usize| {
            let k = self.lattice.mode_number(i) + self.lattice.mode_number(j);
            let arg = 2.0 * PI * ((k * cells).rem_euclid(m as i64)) as f64 / m as f64;
            C64::from_polar(1.0, arg)
        };
        let mut out = self.clone();
        for ((i, j), v) in out.xi.indexed_iter_mut() {
            *v *= phase(i, j);
        }
        for ((i, j), v) in out.eta.indexed_iter_mut() {
            *v *= phase(i, j);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.xi
            .iter()
            .zip(other.xi.iter())
            .chain(self.eta.iter().zip(other.eta.iter()))
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn to_state(&self) -> TwoPhotonState {
        from_modes(self)
    }
}

fn fft2(grid: &Array2<C64>, direction: FftDirection) -> Array2<C64> {
    let m = grid.nrows();
    let fft = FftPlanner::new().plan_fft(m, direction);
    let mut out = grid.clone();
    let mut buf = vec![C64::new(0.0, 0.0); m];
    for mut row in out.rows_mut() {
        buf.iter_mut().zip(row.iter()).for_each(|(b, v)| *b = *v);
        fft.process(&mut buf);
        row.iter_mut().zip(buf.iter()).for_each(|(v, b)| *v = *b);
    }
    for mut col in out.columns_mut() {
        buf.iter_mut().zip(col.iter()).for_each(|(b, v)| *b = *v);
        fft.process(&mut buf);
        col.iter_mut().zip(buf.iter()).for_each(|(v, b)| *v = *b);
    }
    out
}

fn grid_to_modes(lattice: Lattice, psi: &Array2<C64>) -> Array2<C64> {
    let m = lattice.cells();
    let spectrum = fft2(psi, FftDirection::Forward);
    let scale = lattice.dz() / m as f64;
    let p = |i: usize| lattice.mode_number(i).rem_euclid(m as i64) as usize;
    Array2::from_shape_fn((m, m), |(i, j)| spectrum[[p(i), p(j)]] * scale)
}

fn modes_to_grid(lattice: Lattice, xi: &Array2<C64>) -> Array2<C64> {
    let m = lattice.cells();
    let mut spectrum = Array2::zeros((m, m));
    let p = |i: usize| lattice.mode_number(i).rem_euclid(m as i64) as usize;
    for ((i, j), v) in xi.indexed_iter() {
        spectrum[[p(i), p(j)]] = *v;
    }
    let scale = 1.0 / lattice.length();
    let mut psi = fft2(&spectrum, FftDirection::Inverse);
    psi.mapv_inplace(|a| a * scale);
    psi
}

/// Cell grids to mode coefficients.
pub fn to_modes(state: &TwoPhotonState) -> ModeCoefficients {
    let lattice = state.lattice();
    ModeCoefficients {
        lattice,
        xi: grid_to_modes(lattice, state.psi_omega()),
        eta: grid_to_modes(lattice, state.psi_e()),
        t: state.t(),
    }
}

/// Inverse of [`to_modes`].
pub fn from_modes(modes: &ModeCoefficients) -> TwoPhotonState {
    let lattice = modes.lattice();
    TwoPhotonState {
        lattice,
        psi_omega: modes_to_grid(lattice, &modes.xi),
        psi_e: modes_to_grid(lattice, &modes.eta),
        t: modes.t,
    }
}
