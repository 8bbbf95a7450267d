//! Exact split-step propagation at whole-cell time steps.
//!
//! One step with `dt = dz/c` shifts both grids by one cell along each index
//! (co-propagation of both photons) and then rotates the coincident-cell pair
//! `(psi_omega[l, l], psi_e[l, l])` by `theta = kappa c dt` wherever the medium
//! is active:
//!
//! ```text
//! psi_omega <- cos(theta) psi_omega - i sin(theta) psi_e
//! psi_e     <- -i sin(theta) psi_omega + cos(theta) psi_e
//! ```
//!
//! The mask is read at the destination cell, so a pair sitting in window cell
//! `l` at a cell-aligned time has been rotated once for every active cell from
//! the window entrance up to and including `l`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::lattice::{Lattice, TwoPhotonState, C64};

/// Cells where the nonlinear medium is present.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MediumMask {
    active: Vec<bool>,
}

impl MediumMask {
    /// Medium everywhere on the ring.
    pub fn full(cells: usize) -> Self {
        Self {
            active: vec![true; cells],
        }
    }

    pub fn empty(cells: usize) -> Self {
        Self {
            active: vec![false; cells],
        }
    }

    /// Half-open window `[start, end)`; must not wrap around the ring.
    pub fn window(cells: usize, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > cells {
            return Err(Error::InvalidParameter(format!(
                "window [{start}, {end}) is not a non-empty range inside 0..{cells}"
            )));
        }
        Ok(Self {
            active: (0..cells).map(|l| (start..end).contains(&l)).collect(),
        })
    }

    pub fn from_flags(active: Vec<bool>) -> Self {
        Self { active }
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.active[cell]
    }

    pub fn is_full(&self) -> bool {
        self.active.iter().all(|&a| a)
    }

    pub fn active_cells(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    /// `[start, end)` when the active cells form one contiguous non-wrapping run.
    pub fn window_bounds(&self) -> Option<(usize, usize)> {
        let start = self.active.iter().position(|&a| a)?;
        let end = start + self.active[start..].iter().take_while(|&&a| a).count();
        self.active[end..].iter().all(|&a| !a).then_some((start, end))
    }

    pub fn flags(&self) -> &[bool] {
        &self.active
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepPlan {
    /// Coupling per unit length, `g / Delta`.
    pub kappa: f64,
    pub dt: f64,
    pub n_steps: usize,
    pub mask: MediumMask,
}

impl StepPlan {
    /// Plan with the only supported step, `dt = dz/c`.
    pub fn new(lattice: Lattice, kappa: f64, n_steps: usize, mask: MediumMask) -> Result<Self> {
        if !kappa.is_finite() {
            return Err(Error::InvalidParameter(format!("kappa must be finite, got {kappa}")));
        }
        if mask.len() != lattice.cells() {
            return Err(Error::InvalidParameter(format!(
                "mask covers {} cells, lattice has {}",
                mask.len(),
                lattice.cells()
            )));
        }
        Ok(Self {
            kappa,
            dt: lattice.cell_time(),
            n_steps,
            mask,
        })
    }

    /// Full ring medium.
    pub fn full_ring(lattice: Lattice, kappa: f64, n_steps: usize) -> Result<Self> {
        Self::new(lattice, kappa, n_steps, MediumMask::full(lattice.cells()))
    }

    /// Rotation angle applied per active cell.
    pub fn angle_per_step(&self, lattice: Lattice) -> f64 {
        self.kappa * lattice.c() * self.dt
    }

    fn check(&self, lattice: Lattice) -> Result<()> {
        let expected = lattice.cell_time();
        if (self.dt - expected).abs() > 1e-12 * expected {
            return Err(Error::UnsupportedStep {
                dt: self.dt,
                expected,
            });
        }
        if self.mask.len() != lattice.cells() {
            return Err(Error::InvalidParameter(format!(
                "mask covers {} cells, lattice has {}",
                self.mask.len(),
                lattice.cells()
            )));
        }
        Ok(())
    }
}

fn shift_one(grid: &Array2<C64>) -> Array2<C64> {
    let m = grid.nrows();
    Array2::from_shape_fn((m, m), |(l, lp)| grid[[(l + m - 1) % m, (lp + m - 1) % m]])
}

fn check_finite(state: &TwoPhotonState) -> Result<()> {
    let bad = state
        .psi_omega()
        .iter()
        .chain(state.psi_e().iter())
        .any(|a| !a.is_finite());
    if bad {
        return Err(Error::NumericFault(format!("non-finite amplitude at t = {}", state.t())));
    }
    Ok(())
}

fn step_unchecked(state: &TwoPhotonState, plan: &StepPlan, cos: f64, sin: f64) -> TwoPhotonState {
    let lattice = state.lattice();
    let mut next = TwoPhotonState::from_grids(
        lattice,
        shift_one(state.psi_omega()),
        shift_one(state.psi_e()),
        state.t() + plan.dt,
    )
    .expect("shift preserves shape");
    let (omega, e) = next.grids_mut();
    let mis = C64::new(0.0, -sin);
    for l in (0..lattice.cells()).filter(|&l| plan.mask.is_active(l)) {
        let (a, b) = (omega[[l, l]], e[[l, l]]);
        omega[[l, l]] = a * cos + b * mis;
        e[[l, l]] = a * mis + b * cos;
    }
    next
}

/// Advances `state` by one whole-cell step.
pub fn step(state: &TwoPhotonState, plan: &StepPlan) -> Result<TwoPhotonState> {
    let lattice = state.lattice();
    plan.check(lattice)?;
    check_finite(state)?;
    let theta = plan.angle_per_step(lattice);
    Ok(step_unchecked(state, plan, theta.cos(), theta.sin()))
}

/// Applies `plan.n_steps` steps and calls `visit` on the initial state, on
/// every `snapshot_every`-th state and on the final state.
pub fn run_with<F>(state: &TwoPhotonState, plan: &StepPlan, snapshot_every: usize, mut visit: F) -> Result<TwoPhotonState>
where
    F: FnMut(&TwoPhotonState),
{
    if snapshot_every == 0 {
        return Err(Error::InvalidParameter("snapshot_every must be at least 1".into()));
    }
    let lattice = state.lattice();
    plan.check(lattice)?;
    check_finite(state)?;
    let theta = plan.angle_per_step(lattice);
    let (cos, sin) = (theta.cos(), theta.sin());
    visit(state);
    let mut current = state.clone();
    for n in 1..=plan.n_steps {
        current = step_unchecked(&current, plan, cos, sin);
        if n % snapshot_every == 0 || n == plan.n_steps {
            check_finite(&current)?;
            visit(&current);
        }
    }
    check_finite(&current)?;
    Ok(current)
}

/// Final state only.
pub fn evolve(state: &TwoPhotonState, plan: &StepPlan) -> Result<TwoPhotonState> {
    run_with(state, plan, plan.n_steps.max(1), |_| {})
}

/// Ordered snapshots of a run, starting at the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub snapshots: Vec<TwoPhotonState>,
}

impl Trajectory {
    pub fn initial(&self) -> Option<&TwoPhotonState> {
        self.snapshots.first()
    }

    pub fn last(&self) -> Option<&TwoPhotonState> {
        self.snapshots.last()
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

pub fn run(state: &TwoPhotonState, plan: &StepPlan, snapshot_every: usize) -> Result<Trajectory> {
    let mut snapshots = Vec::new();
    run_with(state, plan, snapshot_every, |s| snapshots.push(s.clone()))?;
    Ok(Trajectory { snapshots })
}

/// Angle `kappa dz * (active cells entered)` picked up by a coincident pair
/// that sits in `entry_cell` at the start and moves one cell per step.
pub fn rotation_angle_accumulated(mask: &MediumMask, kappa: f64, dz: f64, entry_cell: usize, steps: usize) -> f64 {
    let m = mask.len();
    if m == 0 {
        return 0.0;
    }
    let full_turns = steps / m;
    let rest = (1..=steps % m)
        .filter(|j| mask.is_active((entry_cell + j) % m))
        .count();
    kappa * dz * (full_turns * mask.active_cells() + rest) as f64
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::lattice::Envelope;

    fn lat(m: usize) -> Lattice {
        Lattice::with_cells(m).unwrap()
    }

    fn point_pair(m: usize, cell: usize) -> TwoPhotonState {
        let p = Envelope::point(lat(m), cell).unwrap();
        TwoPhotonState::separable(&p, &p).unwrap()
    }

    #[test]
    fn free_transport_is_periodic() {
        let l = lat(8);
        let g = Envelope::gaussian(l, 3.0, 1.0).unwrap();
        let s = TwoPhotonState::separable(&g, &g).unwrap();
        let plan = StepPlan::full_ring(l, 0.0, 8).unwrap();
        let out = evolve(&s, &plan).unwrap();
        assert_eq!(out.psi_omega(), s.psi_omega());
        assert_eq!(out.t(), 8.0);
    }

    #[test]
    fn quarter_cycle_converts_completely() {
        let s = point_pair(8, 2);
        let plan = StepPlan::full_ring(lat(8), PI / 16.0, 8).unwrap();
        let out = evolve(&s, &plan).unwrap();
        // eight steps bring the pair back to cell 2
        assert!(out.psi_omega()[[2, 2]].norm() < 1e-15);
        assert!((out.psi_e()[[2, 2]] - C64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn half_cycle_flips_sign() {
        let s = point_pair(8, 2);
        let plan = StepPlan::full_ring(lat(8), PI / 16.0, 16).unwrap();
        let out = evolve(&s, &plan).unwrap();
        assert!((out.psi_omega()[[2, 2]] + C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(out.psi_e()[[2, 2]].norm() < 1e-15);
    }

    #[test]
    fn rejects_sub_cell_steps_and_nan() {
        let s = point_pair(4, 0);
        let mut plan = StepPlan::full_ring(lat(4), 0.1, 1).unwrap();
        plan.dt = 0.5;
        assert!(matches!(step(&s, &plan), Err(Error::UnsupportedStep { .. })));
        let mut bad = s.psi_omega().clone();
        bad[[1, 1]] = C64::new(f64::NAN, 0.0);
        let s = TwoPhotonState::from_grids(lat(4), bad, Array2::zeros((4, 4)), 0.0).unwrap();
        let plan = StepPlan::full_ring(lat(4), 0.1, 1).unwrap();
        assert!(matches!(step(&s, &plan), Err(Error::NumericFault(_))));
    }

    #[test]
    fn run_snapshots() {
        let l = lat(6);
        let s = point_pair(6, 1);
        let plan = StepPlan::full_ring(l, 0.0, 0).unwrap();
        let traj = run(&s, &plan, 1).unwrap();
        assert_eq!(traj.len(), 1);
        let plan = StepPlan::full_ring(l, 0.0, 6).unwrap();
        let traj = run(&s, &plan, 4).unwrap();
        // t = 0, 4, and the final 6
        assert_eq!(traj.len(), 3);
        assert_eq!(traj.initial().unwrap().psi_omega(), traj.last().unwrap().psi_omega());
        assert!(run(&s, &plan, 0).is_err());
    }

    #[test]
    fn accumulated_angle() {
        let k = 0.3;
        let full = MediumMask::full(10);
        assert!((rotation_angle_accumulated(&full, k, 1.0, 4, 5) - 5.0 * k).abs() < 1e-15);
        let win = MediumMask::window(10, 0, 3).unwrap();
        for s in 1..6 {
            let entry = 10 - s;
            let a = rotation_angle_accumulated(&win, k, 1.0, entry, s + 3);
            assert!((a - 3.0 * k).abs() < 1e-15, "s = {s}");
        }
        let empty = MediumMask::empty(10);
        assert_eq!(rotation_angle_accumulated(&empty, k, 1.0, 3, 40), 0.0);
    }

    #[test]
    fn mask_windows() {
        assert!(MediumMask::window(10, 3, 3).is_err());
        assert!(MediumMask::window(10, 3, 11).is_err());
        let w = MediumMask::window(10, 3, 7).unwrap();
        assert_eq!(w.window_bounds(), Some((3, 7)));
        assert_eq!(w.active_cells(), 4);
        assert_eq!(MediumMask::full(5).window_bounds(), Some((0, 5)));
        let split = MediumMask::from_flags(vec![true, false, true]);
        assert_eq!(split.window_bounds(), None);
    }
}
