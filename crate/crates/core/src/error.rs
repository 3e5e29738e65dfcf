use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero extent: all points coincide")]
    ZeroExtent,

    #[error("empty point set")]
    EmptySet,

    #[error("non-finite coordinate at point {0}")]
    NonFiniteCoordinate(usize),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tensor shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: String,
        expected: String,
        got: String,
    },

    #[error("non-finite activation in layer {layer} ({kind})")]
    NonFiniteActivation { layer: usize, kind: &'static str },

    #[error("non-finite gradient at index {0}")]
    NonFiniteGradient(usize),

    #[error("backward called without a cached forward pass (layer {0})")]
    BackwardWithoutForward(usize),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error("component not trained: {0}")]
    Untrained(String),

    #[error("invalid shape parameters: {0}")]
    InvalidShape(String),

    #[error("shape outside all frusta: no ray hits")]
    NoHits,

    #[error("malformed PLY {path}: {detail}")]
    MalformedPly { path: String, detail: String },

    #[error("malformed XYZ {path}: {detail}")]
    MalformedXyz { path: String, detail: String },

    #[error("missing checkpoint: {0}")]
    MissingCheckpoint(PathBuf),

    #[error("checkpoint architecture mismatch: expected {expected}, found {found}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("invalid checkpoint: {0}")]
    InvalidCheckpoint(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("run directory locked: {0}")]
    Locked(PathBuf),

    #[error("missing input: {0}")]
    MissingInput(PathBuf),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
