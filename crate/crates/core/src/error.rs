use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An image file could not be opened or decoded.
    #[error("failed to ingest image {path}: {reason}")]
    Ingestion { path: PathBuf, reason: String },

    /// A caller-supplied argument violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Input tensor dimensions do not match what the model expects.
    #[error("input shape mismatch: model expects 3x{expected_h}x{expected_w}, got {got_c}x{got_h}x{got_w}")]
    ShapeMismatch {
        expected_h: usize,
        expected_w: usize,
        got_c: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("unknown layer `{name}`; available layers: {}", available.join(", "))]
    UnknownLayer { name: String, available: Vec<String> },

    #[error("layer `{0}` is not differentiable")]
    NotDifferentiable(String),

    #[error("class index {class} out of range for a model with {num_classes} classes")]
    ClassOutOfRange { class: usize, num_classes: usize },

    /// NaN or infinite values encountered inside a saliency pipeline.
    #[error("non-finite value encountered during {stage}")]
    Numeric { stage: String },

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    /// A line-oriented text input failed to parse.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid model profile: {0}")]
    Profile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
