use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("invalid conditional activation: {0}")]
    InvalidActivation(String),

    #[error("conditional neuron {neuron} in a layer of {layer_size} has no valid peer")]
    NoPeer { neuron: usize, layer_size: usize },

    #[error("training diverged at epoch {epoch}, batch {batch}: {reason}")]
    Divergence {
        epoch: usize,
        batch: usize,
        reason: String,
    },

    #[error("bad IDX magic number: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },

    #[error("truncated IDX data: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("unsupported image dimensions {rows}x{cols}, expected 28x28")]
    BadImageDims { rows: usize, cols: usize },

    #[error("label {label} at index {index} is out of range for {classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        classes: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("IDX payload has {actual} bytes, expected exactly {expected}")]
    TrailingData { expected: usize, actual: usize },

    #[error("invalid experiment config: {0}")]
    Config(String),

    #[error("run too short: {epochs} epochs recorded, at least {required} needed")]
    RunTooShort { epochs: usize, required: usize },

    #[error("unsupported checkpoint format `{0}`")]
    CheckpointFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by numerical blow-up rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(self, Error::Divergence { .. } | Error::NonFinite { .. })
    }
}
