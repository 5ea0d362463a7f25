use std::path::PathBuf;

use thiserror::Error;

use crate::field::VectorField;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown material `{name}` (available: {})", available.join(", "))]
    MaterialNotFound { name: String, available: Vec<String> },

    #[error("non-finite value at cell {cell}")]
    NonFinite { cell: usize },

    #[error("time step underflow ({dt:e} s) at t = {t:e} s")]
    Stiffness { t: f64, dt: f64 },

    #[error("relaxation did not converge within {limit} (max torque {torque:e} rad/s)")]
    NonConvergence {
        limit: String,
        torque: f64,
        state: Box<VectorField>,
    },

    #[error("state preparation landed in {achieved} instead of {target}")]
    Preparation { target: String, achieved: String },

    #[error("switching time indeterminate: trace ends {remaining:e} s after a crossing at {crossing:e} s")]
    Indeterminate { crossing: f64, remaining: f64 },

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("config parse error: {0}")]
    Parse(String),

    #[error("invalid config value at `{key}`: {reason}")]
    Validation { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
