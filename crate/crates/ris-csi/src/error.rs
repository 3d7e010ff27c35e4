//! Crate-wide error type.

use thiserror::Error;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors emitted by the simulation, estimation and training layers.
#[derive(Error, Debug)]
pub enum Error {
    /// Operands have incompatible dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// An argument violates a precondition.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// An operation was invoked before its prerequisites exist
    /// (e.g. a stage trained before its upstream checkpoint).
    #[error("state error: {0}")]
    State(String),

    /// A non-finite value surfaced where finite arithmetic is required.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Input lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Training diverged or could not make progress.
    #[error("training error: {0}")]
    Training(String),

    /// A serialized artifact has a bad magic, version or layout.
    #[error("format error: {0}")]
    Format(String),

    /// Configuration file could not be parsed or is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
