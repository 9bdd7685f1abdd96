use std::path::PathBuf;

use thiserror::Error;

use crate::config::StabilityReport;

pub type Result<T> = std::result::Result<T, KkfError>;

#[derive(Debug, Error)]
pub enum KkfError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed grid: {0}")]
    MalformedGrid(String),

    #[error("grid violates the positivity conditions: {0}")]
    StabilityViolation(StabilityReport),

    #[error("invalid frequency distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid initial data: {0}")]
    InvalidInitialData(String),

    #[error("slice {slice} is not normalized (mass {mass})")]
    Unnormalized { slice: usize, mass: f64 },

    #[error("slice {slice} has no mass left; the omega domain is too small")]
    ZeroMassSlice { slice: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value produced at step {step} (last good step {last_good})")]
    NonFinite { step: usize, last_good: usize },

    #[error("rejection sampler acceptance rate {rate:.3e} is below 1e-4")]
    DegenerateSampler { rate: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown preset `{name}` (available: {available})")]
    UnknownPreset { name: String, available: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl KkfError {
    /// Errors caused by bad input rather than by a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            KkfError::InvalidParameter(_)
                | KkfError::MalformedGrid(_)
                | KkfError::StabilityViolation(_)
                | KkfError::InvalidDistribution(_)
                | KkfError::InvalidInitialData(_)
                | KkfError::Config(_)
                | KkfError::UnknownPreset { .. }
        )
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KkfError::Io {
            path: path.into(),
            source,
        }
    }
}
