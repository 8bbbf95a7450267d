//! Simulation configuration and the envelope / mask mini-grammar.
//!
//! ```text
//! envelope := "gaussian:" <center:float> "," <width:float>
//!           | "point:" <cell:uint>
//! mask     := "full"
//!           | "window:" <start:uint> "," <end:uint>      half-open [start, end)
//! input    := "separable" | "diagonal" | "generated"
//! ```
//!
//! Keywords are lowercase, no whitespace is accepted inside a spec, and
//! anything not matching the grammar is rejected with the offending token.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::{Envelope, Lattice, TwoPhotonState};
use crate::propagator::{MediumMask, StepPlan};

fn spec_error(spec: &str, token: &str, reason: impl Into<String>) -> Error {
    Error::Spec {
        spec: spec.to_string(),
        token: token.to_string(),
        reason: reason.into(),
    }
}

/// Splits `kind:a,b,...` into the keyword and exactly `arity` arguments.
fn split_args<'a>(spec: &'a str, rest: &'a str, arity: usize) -> Result<Vec<&'a str>> {
    let args: Vec<&str> = rest.split(',').collect();
    if args.len() != arity {
        let token = args.get(arity).copied().unwrap_or(rest);
        return Err(spec_error(spec, token, format!("expected {arity} comma-separated argument(s)")));
    }
    if let Some(empty) = args.iter().find(|a| a.is_empty()) {
        return Err(spec_error(spec, empty, "empty argument"));
    }
    Ok(args)
}

fn parse_float(spec: &str, token: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| spec_error(spec, token, "not a finite number"))
}

fn parse_uint(spec: &str, token: &str) -> Result<usize> {
    token
        .parse::<usize>()
        .map_err(|_| spec_error(spec, token, "not a non-negative integer"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnvelopeSpec {
    Gaussian { center: f64, width: f64 },
    Point { cell: usize },
}

impl EnvelopeSpec {
    pub fn build(&self, lattice: Lattice) -> Result<Envelope> {
        match *self {
            EnvelopeSpec::Gaussian { center, width } => Envelope::gaussian(lattice, center, width),
            EnvelopeSpec::Point { cell } => Envelope::point(lattice, cell),
        }
    }
}

impl FromStr for EnvelopeSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| spec_error(spec, spec, "expected `gaussian:center,width` or `point:cell`"))?;
        match kind {
            "gaussian" => {
                let a = split_args(spec, rest, 2)?;
                Ok(EnvelopeSpec::Gaussian {
                    center: parse_float(spec, a[0])?,
                    width: parse_float(spec, a[1])?,
                })
            }
            "point" => {
                let a = split_args(spec, rest, 1)?;
                Ok(EnvelopeSpec::Point {
                    cell: parse_uint(spec, a[0])?,
                })
            }
            other => Err(spec_error(spec, other, "unknown envelope kind")),
        }
    }
}

impl fmt::Display for EnvelopeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnvelopeSpec::Gaussian { center, width } => write!(f, "gaussian:{center},{width}"),
            EnvelopeSpec::Point { cell } => write!(f, "point:{cell}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskSpec {
    Full,
    Window { start: usize, end: usize },
}

impl MaskSpec {
    pub fn build(&self, cells: usize) -> Result<MediumMask> {
        match *self {
            MaskSpec::Full => Ok(MediumMask::full(cells)),
            MaskSpec::Window { start, end } => MediumMask::window(cells, start, end),
        }
    }
}

impl FromStr for MaskSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        if spec == "full" {
            return Ok(MaskSpec::Full);
        }
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| spec_error(spec, spec, "expected `full` or `window:start,end`"))?;
        if kind != "window" {
            return Err(spec_error(spec, kind, "unknown mask kind"));
        }
        let a = split_args(spec, rest, 2)?;
        let (start, end) = (parse_uint(spec, a[0])?, parse_uint(spec, a[1])?);
        if start >= end {
            return Err(spec_error(spec, a[1], "window end must exceed start"));
        }
        Ok(MaskSpec::Window { start, end })
    }
}

impl fmt::Display for MaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaskSpec::Full => write!(f, "full"),
            MaskSpec::Window { start, end } => write!(f, "window:{start},{end}"),
        }
    }
}

/// How the envelope becomes a two-photon state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InputKind {
    /// Independent photons, `f0(l) f0(l')` in the pump pair.
    #[default]
    Separable,
    /// Entangled pair on the coincident cells only.
    Diagonal,
    /// Separable, but starting in the generated pair.
    Generated,
}

impl FromStr for InputKind {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        match spec {
            "separable" => Ok(InputKind::Separable),
            "diagonal" => Ok(InputKind::Diagonal),
            "generated" => Ok(InputKind::Generated),
            other => Err(spec_error(spec, other, "expected separable, diagonal or generated")),
        }
    }
}

impl fmt::Display for InputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InputKind::Separable => "separable",
            InputKind::Diagonal => "diagonal",
            InputKind::Generated => "generated",
        })
    }
}

/// Validation thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Closed-form comparisons of exact propagator output.
    pub analytic: f64,
    pub mode_mixing: f64,
    pub oracle_l2: f64,
    pub fock_deviation: f64,
    pub fock_leakage: f64,
    pub lambda_identity: f64,
    pub conservation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            analytic: 1e-12,
            mode_mixing: 1e-10,
            oracle_l2: 1e-8,
            fock_deviation: 1e-9,
            fock_leakage: 1e-12,
            lambda_identity: 1e-12,
            conservation: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub cells: usize,
    pub dz: f64,
    pub c: f64,
    pub kappa: f64,
    pub steps: usize,
    pub snapshot_every: usize,
    pub envelope: EnvelopeSpec,
    pub mask: MaskSpec,
    pub input: InputKind,
    pub tolerances: Tolerances,
}

impl Default for SimConfig {
    /// 45 cells, `gaussian:22,4`, full ring, `kappa = pi/45` for one full
    /// cycle per ring traversal, run for one cycle.
    fn default() -> Self {
        Self {
            cells: 45,
            dz: 1.0,
            c: 1.0,
            kappa: PI / 45.0,
            steps: 45,
            snapshot_every: 1,
            envelope: EnvelopeSpec::Gaussian {
                center: 22.0,
                width: 4.0,
            },
            mask: MaskSpec::Full,
            input: InputKind::Separable,
            tolerances: Tolerances::default(),
        }
    }
}

impl SimConfig {
    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.cells, self.dz, self.c)
    }

    pub fn envelope(&self) -> Result<Envelope> {
        self.envelope.build(self.lattice()?)
    }

    pub fn initial_state(&self) -> Result<TwoPhotonState> {
        let e = self.envelope()?;
        match self.input {
            InputKind::Separable => TwoPhotonState::separable(&e, &e),
            InputKind::Diagonal => TwoPhotonState::diagonal_entangled(&e),
            InputKind::Generated => Ok(TwoPhotonState::separable(&e, &e)?.swap_species()),
        }
    }

    pub fn medium(&self) -> Result<MediumMask> {
        self.mask.build(self.cells)
    }

    pub fn plan(&self) -> Result<StepPlan> {
        StepPlan::new(self.lattice()?, self.kappa, self.steps, self.medium()?)
    }

    /// Checks every downstream precondition without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter("snapshot_every must be at least 1".into()));
        }
        self.initial_state()?;
        self.plan()?;
        Ok(())
    }
}
