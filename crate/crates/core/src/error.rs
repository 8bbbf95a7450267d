use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulator, the oracles and the harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported step: dt = {dt} but the propagator only takes whole-cell steps dt = dz/c = {expected}")]
    UnsupportedStep { dt: f64, expected: f64 },

    #[error("numeric fault: {0}")]
    NumericFault(String),

    #[error("step too large: dt*kappa*c = {product} exceeds {limit}")]
    StepTooLarge { product: f64, limit: f64 },

    #[error("capacity exceeded: {0}")]
    CapacityExceeded(String),

    #[error("matrix is not hermitian (max |H - H^dagger| = {0:e})")]
    NonHermitian(f64),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("scenario registry is empty")]
    EmptyRegistry,

    #[error("malformed spec `{spec}`: {reason} (offending token `{token}`)")]
    Spec {
        spec: String,
        token: String,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {reason}")]
    Csv { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
