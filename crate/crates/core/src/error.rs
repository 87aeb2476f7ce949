//! Error type shared across the crate.

use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by scene construction, rendering, solving, and file I/O.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid depth: {0}")]
    InvalidDepth(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch in {context}: expected {expected}, found {found}")]
    ShapeMismatch {
        context: String,
        expected: String,
        found: String,
    },

    #[error("empty mask: {0}")]
    EmptyMask(String),

    #[error("insufficient lights: need at least {required}, found {found}")]
    InsufficientLights { required: usize, found: usize },

    #[error("surface point coincides with light source at {0:?}")]
    LightSingularity([f64; 3]),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },

    #[error("unsupported version in {path}: expected {expected}, found {found}")]
    Version {
        path: String,
        expected: u16,
        found: u16,
    },

    #[error("unit mismatch for '{field}': expected \"{expected}\", found \"{found}\"")]
    UnitMismatch {
        field: String,
        expected: String,
        found: String,
    },

    #[error("insufficient presses: {0}")]
    InsufficientPresses(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl CoreError {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, found: impl Into<String>) -> Self {
        CoreError::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            found: found.into(),
        }
    }

    pub(crate) fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        CoreError::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
