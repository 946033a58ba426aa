//! Crate-wide error type.

use crate::tensor::Axis;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Slice or index range outside an axis extent.
    #[error("range [{start}, {end}) invalid for extent {extent}")]
    Range {
        start: usize,
        end: usize,
        extent: usize,
    },

    /// Tensor shapes do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A parameter value is outside its documented domain.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A configuration cannot be satisfied (checked before any work starts).
    #[error("infeasible configuration: {0}")]
    Config(String),

    /// Constrained point sampling exhausted its retry budget.
    #[error("point sampling failed along the {axis:?} axis after {attempts} draws")]
    Sampling { axis: Axis, attempts: usize },

    /// Segmentation points collapse onto each other.
    #[error("degenerate segmentation plan: {0}")]
    DegeneratePlan(String),

    /// A binary file does not match its expected layout.
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },

    /// A computation produced non-finite or otherwise unusable values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Model training went off the rails.
    #[error("training error: {0}")]
    Training(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
