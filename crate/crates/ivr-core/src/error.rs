//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by mesh construction, assembly, coupling, and reduction.
#[derive(Debug, Error)]
pub enum IvrError {
    /// A caller-supplied value is out of range or dimensionally inconsistent.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The requested configuration is structurally unsupported
    /// (e.g. mismatched interface grids).
    #[error("unsupported configuration: {0}")]
    UnsupportedConfiguration(String),

    /// The interface Schur complement could not be factorized.
    #[error("singular Schur complement: {0}")]
    SingularSchur(String),

    /// The time integration produced a non-finite state.
    #[error("solution diverged (non-finite state) at step {step}")]
    Divergence { step: usize },

    /// Snapshot data admits no usable modes.
    #[error("empty basis: {0}")]
    EmptyBasis(String),

    /// Reading or writing a persisted basis failed.
    #[error("basis persistence: {0}")]
    Persistence(String),
}

impl From<std::io::Error> for IvrError {
    fn from(e: std::io::Error) -> Self {
        IvrError::Persistence(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, IvrError>;
