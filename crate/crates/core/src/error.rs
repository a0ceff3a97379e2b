use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch {
        left: (usize, usize, usize),
        right: (usize, usize, usize),
    },

    #[error("expected {expected}-channel image, got {actual}")]
    ChannelMismatch { expected: usize, actual: usize },

    #[error("image dimensions must be even, got {height}x{width}")]
    OddDimensions { height: usize, width: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid camera model: {0}")]
    InvalidCamera(String),

    #[error("invalid tone curve: {0}")]
    InvalidToneCurve(String),

    #[error("ISP context was sampled for camera `{expected}`, not `{actual}`")]
    ContextMismatch { expected: String, actual: String },

    #[error("image too small: {height}x{width}, need at least {min}x{min}")]
    ImageTooSmall {
        height: usize,
        width: usize,
        min: usize,
    },

    #[error("plan does not fit image: {0}")]
    PlanMismatch(String),

    #[error("plan invariant violated: {0}")]
    PlanInvariant(String),

    #[error("manifest schema error: {0}")]
    Schema(String),

    #[error("unsupported manifest schema version {found} (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },

    #[error("too few valid pixels for statistics: {found} < {required}")]
    TooFewSamples { found: usize, required: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unsupported PNG {path}: {reason}")]
    UnsupportedPng { path: PathBuf, reason: String },

    #[error("failed to read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image codec error for {path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
