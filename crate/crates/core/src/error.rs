use std::path::PathBuf;

/// Errors produced anywhere in the calibration pipeline.
#[derive(Debug, thiserror::Error)]
pub enum CalibError {
    #[error("degenerate depth {depth:e}: point lies on the camera plane")]
    DegenerateDepth { depth: f64 },

    #[error("invalid quaternion: norm {norm} deviates from 1")]
    InvalidQuaternion { norm: f64 },

    #[error("invalid rotation matrix: {0}")]
    InvalidRotation(String),

    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed file {path}: {reason}")]
    MalformedFile { path: PathBuf, reason: String },

    #[error("malformed calibration {path}: {reason}")]
    MalformedCalib { path: PathBuf, reason: String },

    #[error("resolution mismatch: {0}")]
    ResolutionMismatch(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("non-finite loss at step {step}: {detail}")]
    NonFiniteLoss { step: usize, detail: String },

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: PathBuf, reason: String },

    #[error("missing dataset: {0}")]
    MissingDataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CalibError>;

impl CalibError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CalibError::Io {
            path: path.into(),
            source,
        }
    }
}
