use thiserror::Error;

/// Errors raised by the numeric core, the environments and the agents.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{what}: argument {value} outside the function domain")]
    Domain { what: &'static str, value: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range (< {bound} required)")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("backward called on a node of length {0}; a scalar is required")]
    NotScalar(usize),

    #[error("non-finite value at tape node {node}")]
    NonFinite { node: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
