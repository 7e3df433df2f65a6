use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        location: String,
        message: String,
    },

    #[error("mesh has no faces")]
    EmptyMesh,

    #[error("mesh has no non-degenerate faces")]
    NoValidFaces,

    #[error("bounding box has zero extent")]
    DegenerateExtent,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature pyramid needs {required} bytes, budget is {budget}")]
    MemoryBudgetExceeded { required: u64, budget: u64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite activation in layer {layer}")]
    NonFiniteActivation { layer: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("activation tape does not match the network: {0}")]
    TapeMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at step {step} (loss {loss})")]
    DivergedLoss { step: usize, loss: f64 },

    #[error("checkpoint format error: {0}")]
    Format(String),

    #[error("checkpoint checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    Checksum { stored: u32, computed: u32 },

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("metric needs both classes, only label {0} present")]
    SingleClass(u8),

    #[error("metric needs at least one positive label")]
    NoPositives,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        path: impl Into<PathBuf>,
        location: impl Into<String>,
        message: impl Into<String>,
    ) -> Self {
        Error::Parse {
            path: path.into(),
            location: location.into(),
            message: message.into(),
        }
    }
}
