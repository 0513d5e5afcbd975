use std::path::PathBuf;

use thiserror::Error;

/// Errors produced while loading models, matrices, or evaluating predictions.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}, column {column}: {message}")]
    MachineParse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("invalid machine field `{field}`: {reason}")]
    InvalidMachine { field: &'static str, reason: String },

    #[error("unknown instruction form `{form}` (known forms: {})", known.join(", "))]
    UnknownInstruction { form: String, known: Vec<String> },

    #[error("instruction form `{form}` has no latency")]
    MissingLatency { form: String },

    #[error("unknown kernel `{name}` (known kernels: {})", known.join(", "))]
    UnknownKernel { name: String, known: Vec<String> },

    #[error("kernel `{kernel}` is not a stencil; a layer-condition state does not apply")]
    LayerConditionNotApplicable { kernel: String },

    #[error("invalid traffic profile field `{field}`: {reason}")]
    InvalidTraffic { field: &'static str, reason: String },

    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("dimension mismatch: expected vector of length {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix market: line {line}: {message}")]
    MatrixMarket { line: usize, message: String },

    #[error("grid {nx}x{ny}x{nz} is too large")]
    GridTooLarge { nx: usize, ny: usize, nz: usize },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
