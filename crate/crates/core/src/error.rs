//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is structurally invalid (zero sizes, bad ranges,
    /// unknown names).
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// An argument violates an operation's contract.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Tables, suites, or matrices do not fit the environment's domain.
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    /// The operation is not defined for the environment's output mode.
    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    /// A score distribution sits on the boundary where the diagnostic is
    /// undefined (zero variance, or all-pass probability in {0, 1}).
    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
