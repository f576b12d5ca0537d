use thiserror::Error;

use crate::VertexId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid structure: {0}")]
    InvalidStructure(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("unknown vertex id {0}")]
    UnknownVertex(VertexId),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("network is disconnected: {0}")]
    Disconnected(String),

    #[error("invalid drift: {0}")]
    InvalidDrift(String),

    #[error("inadmissible drift: {0}")]
    Inadmissible(String),

    #[error("invalid generator: {0}")]
    InvalidGenerator(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
