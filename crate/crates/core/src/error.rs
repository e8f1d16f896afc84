//! Error types shared across the crate.

use crate::loss::LossBreakdown;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Structural misuse: widths, dimensions, or freeze layout don't line up.
    #[error("configuration error: {0}")]
    Config(String),

    /// A loss or residual evaluation produced a non-finite number.
    #[error("training fault at epoch {epoch}: {message} (pde={}, initial={}, boundary={})",
            breakdown.pde, breakdown.initial, breakdown.boundary)]
    TrainingFault {
        epoch: usize,
        message: String,
        breakdown: LossBreakdown,
    },

    /// A numerical procedure failed to converge to its documented tolerance.
    #[error("numerical fault: {0}")]
    Numerical(String),

    /// A metric is undefined for the given inputs (e.g. zero reference norm).
    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    /// Malformed checkpoint or artifact file.
    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
