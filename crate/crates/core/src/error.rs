//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 1, 2 or 3)")]
    Dimension(usize),
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("spectral parameter {lambda} too close to the spectrum (distance {dist:.3e})")]
    NearSpectrum { lambda: num_complex::Complex64, dist: f64 },
    #[error("iterative solver failed to converge: {0}")]
    NonConvergence(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// CLI exit code: 2 for validation/input problems, 3 for numerical failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Dimension(_)
            | Error::Validation(_)
            | Error::GridMismatch(_)
            | Error::Io(_)
            | Error::Format(_) => 2,
            Error::NearSpectrum { .. } | Error::NonConvergence(_) => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
