use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("invalid argument to {op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },

    #[error("divisor magnitude below floor {floor} at element {index}")]
    DivisorBelowFloor { index: usize, floor: f64 },

    #[error("non-finite value at element {index} after {op}")]
    NonFinite { op: &'static str, index: usize },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("negative linear-light input {value} at element {index}")]
    NegativeInput { index: usize, value: f64 },

    #[error("invalid network configuration: {0}")]
    Config(String),

    #[error("colorimetry mismatch: expected {expected}, found {found}")]
    SpecMismatch { expected: String, found: String },

    #[error("sidecar {path}: {msg} (key `{key}`)")]
    Sidecar {
        path: PathBuf,
        key: String,
        msg: String,
    },

    #[error("bad magic in {what}: expected {expected:?}")]
    BadMagic { what: &'static str, expected: &'static [u8] },

    #[error("truncated {what} at byte offset {offset}: {detail}")]
    Truncated {
        what: &'static str,
        offset: u64,
        detail: String,
    },

    #[error("unknown tensor `{0}`")]
    UnknownTensor(String),

    #[error("missing tensor `{0}`")]
    MissingTensor(String),

    #[error("tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("training diverged at iteration {iter} (loss {loss}); checkpoint written to {checkpoint:?}")]
    Diverged {
        iter: u64,
        loss: f64,
        checkpoint: Option<PathBuf>,
    },

    #[error("{0}")]
    Dataset(String),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn invalid(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidArgument {
            op,
            msg: msg.into(),
        }
    }
}
