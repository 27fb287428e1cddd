//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the imaging pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied value violates a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two inputs that must agree in shape do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// The registration normal matrix is numerically singular
    /// (featureless image, no texture to lock onto).
    #[error("singular Hessian: image has insufficient texture")]
    SingularHessian,

    /// An internal consistency check failed.
    #[error("internal error: {0}")]
    Internal(String),

    /// Configuration file could not be parsed or failed validation.
    #[error("config error: {0}")]
    Config(String),

    /// An image or table file is malformed.
    #[error("format error: {0}")]
    Format(String),

    /// Another run holds the output directory.
    #[error("output directory {0} is locked by another run (remove the .lock file if stale)")]
    OutputLocked(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
