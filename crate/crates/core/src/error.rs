use std::path::PathBuf;

/// Errors produced anywhere in the saliency pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("image too small for scale: window {window} exceeds {width}x{height}")]
    ImageTooSmall {
        window: usize,
        width: usize,
        height: usize,
    },

    #[error("too few patches for basis learning: {patches} < 10 x {dims}")]
    TooFewPatches { patches: usize, dims: usize },

    #[error("degenerate patch statistics")]
    DegeneratePatchStatistics,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty layer: {0}")]
    EmptyLayer(String),

    #[error("missing layer {0} with non-zero weight")]
    MissingLayer(String),

    #[error("empty fixation set")]
    EmptyFixations,

    #[error("fixation {index} at ({x}, {y}) out of bounds for {width}x{height}")]
    FixationOutOfBounds {
        index: usize,
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },

    #[error("bad magic at byte 0")]
    BadMagic,

    #[error("malformed container at byte {offset}: {reason}")]
    Malformed { offset: u64, reason: String },

    #[error("non-finite value at byte {offset}")]
    NonFinite { offset: u64 },

    #[error("no images could be evaluated")]
    NothingToEvaluate,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
