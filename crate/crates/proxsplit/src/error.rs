//! Error type shared by every layer of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on the inputs was violated (dimension mismatch,
    /// out-of-range parameter, malformed structure, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numerical routine failed to produce a trustworthy result.
    /// `last_estimate` carries the best value available at failure, when one
    /// exists (e.g. the current power-iteration estimate).
    #[error("numerical failure: {message}")]
    NumericalFailure {
        message: String,
        last_estimate: Option<f64>,
    },

    /// The requested operation is outside the supported scope
    /// (e.g. tangent machinery for the fixed-rank matrix manifold).
    #[error("unsupported feature: {0}")]
    UnsupportedFeature(String),

    /// Not enough usable data to produce the requested answer
    /// (e.g. a rate-fit window with fewer than 30 records).
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::NumericalFailure {
            message: msg.into(),
            last_estimate: None,
        }
    }

    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::UnsupportedFeature(msg.into())
    }

    pub fn insufficient(msg: impl Into<String>) -> Self {
        Error::InsufficientData(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
