use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("the ladder needs at least one doublet")]
    NoDoublets,

    #[error("negative rate {rate} on channel {label}")]
    NegativeRate { label: String, rate: f64 },

    #[error("unknown channel label `{0}`")]
    UnknownChannel(String),

    #[error("a coherence needs two distinct levels, got level {0} twice")]
    SameLevel(usize),

    #[error("matrix dimension mismatch: expected {expected}, got {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidDensity(String),

    #[error("population block is defective near eigenvalue {eigenvalue}")]
    Defective { eigenvalue: String },

    #[error("eigensolver did not converge")]
    NoConvergence,

    #[error("time step {dt:e} s exceeds the stability bound {bound:e} s")]
    StepTooLarge { dt: f64, bound: f64 },

    #[error("time grid must be nonempty, finite, nonnegative and strictly increasing")]
    BadGrid,

    #[error("{path}:{line}: {reason}")]
    Parse {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("{0}: no data rows")]
    NoData(String),

    #[error("time {t:e} s lies outside the model curve span [{start:e}, {end:e}] s")]
    Extrapolation { t: f64, start: f64, end: f64 },

    #[error("fit needs at least {needed} data points, got {found}")]
    TooFewPoints { needed: usize, found: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
