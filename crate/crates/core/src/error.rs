use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
///
/// The CLI maps variants onto its exit-code contract: input-side failures
/// exit with 2, configuration failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    /// Image dimensions incompatible with the requested operation.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// Invalid configuration value or degenerate derived setting.
    #[error("configuration error: {0}")]
    Config(String),

    /// Unreadable or malformed input file.
    #[error("input error: {path}: {message}")]
    Input { path: PathBuf, message: String },

    /// Malformed record in a line-oriented input file.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// Too few correspondences to attempt model estimation.
    #[error("insufficient matches: {found} found, {required} required")]
    InsufficientMatches { found: usize, required: usize },

    /// No consensus model with enough inliers could be found.
    #[error("degenerate geometry: no consensus model found")]
    DegenerateGeometry,

    /// Frames handed to a stateful consumer out of order.
    #[error("sequencing error: expected frame {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    /// Prediction and ground-truth streams do not cover the same frames.
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
