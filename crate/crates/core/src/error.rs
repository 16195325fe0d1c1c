use std::io;

use thiserror::Error;

/// Errors produced by the NoisePrints toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid transform: {0}")]
    InvalidTransform(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("insufficient overlap: mask covers {coverage:.4} of the frame")]
    InsufficientOverlap { coverage: f64 },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("alignment estimation failed: best score {best:.4} below {required:.4}")]
    EstimationFailed { best: f64, required: f64 },

    #[error("attack diverged: {0}")]
    Diverged(String),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
