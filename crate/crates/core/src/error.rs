use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the environment, estimators, bandit loop and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("arm index {arm} out of range for an instance with {count} arms")]
    ArmOutOfRange { arm: usize, count: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("contamination level alpha = {alpha} is at or above the breakdown point {limit} of the central-moment estimator")]
    Breakdown { alpha: f64, limit: f64 },

    #[error("expected {expected} samples, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("estimation requires at least one sample")]
    EmptyData,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
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
}
