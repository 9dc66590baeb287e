//! Error types shared across the crate.

use thiserror::Error;

/// Crate-wide error type.
///
/// The variants map onto the failure classes of the public API: argument
/// validation, broken caller contracts, degenerate controller actions,
/// diverged training runs, and I/O or parse failures on external files.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied argument is outside the operation's domain.
    #[error("invalid-argument: {0}")]
    InvalidArgument(String),

    /// A precondition that callers must uphold was violated.
    #[error("contract-violation: {0}")]
    ContractViolation(String),

    /// A sampled parent mask selected no candidates.
    #[error("degenerate-selection: parent mask selected no candidates")]
    DegenerateSelection,

    /// Training produced a non-finite loss or gradient.
    #[error("training-divergence: non-finite value at iteration {iteration}: {detail}")]
    TrainingDivergence { iteration: usize, detail: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    /// A config, instance, or metrics file failed to parse.
    #[error("parse: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn contract(msg: impl Into<String>) -> Self {
        Error::ContractViolation(msg.into())
    }

    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
