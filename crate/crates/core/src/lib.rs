//! Two co-propagating single photons under resonant four-wave mixing.
//!
//! The state lives in the two-photon sector: a pair of pump photons with
//! joint amplitude `psi_omega[l, l']` and a pair of generated photons with
//! `psi_e[l, l']` on a periodic ring of cells. [`propagator`] evolves it
//! exactly at whole-cell steps; [`mode_oracle`] and [`fock`] are independent
//! cross-checks; [`analytic`] holds the closed-form solutions; [`harness`]
//! binds them into named validation scenarios.

pub mod analytic;
pub mod config;
pub mod error;
pub mod fock;
pub mod harness;
pub mod io;
pub mod lattice;
pub mod mode_oracle;
pub mod observables;
pub mod propagator;

pub use error::{Error, Result};
pub use lattice::{from_modes, to_modes, Envelope, Lattice, ModeCoefficients, TwoPhotonState, C64};
pub use propagator::{run, step, MediumMask, StepPlan, Trajectory};
