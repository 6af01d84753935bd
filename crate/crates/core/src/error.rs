use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what}: value {value} outside ({lo}, {hi})")]
    Domain {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("time {t} outside the rate's support [{lo}, {hi}]")]
    OutsideSupport { t: f64, lo: f64, hi: f64 },

    #[error("upper limit {t} precedes lower limit {t0}")]
    ReversedInterval { t0: f64, t: f64 },

    #[error("degenerate law at t = t0 = {t}: point mass at {point_mass}")]
    DegenerateTime { t: f64, point_mass: f64 },

    #[error("threshold {m} unreachable: {reason}")]
    Unreachable { m: f64, reason: String },

    #[error("non-positive noise increment {value} on step {step}")]
    NonPositiveNoise { step: usize, value: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("replicate {replicate}: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse grouping used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Input,
    Io,
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Numerical(_) | Error::NonPositiveNoise { .. } | Error::Unreachable { .. } => {
                ErrorCategory::Numerical
            }
            Error::Replicate { source, .. } => source.category(),
            _ => ErrorCategory::Input,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
