//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value at layer {layer} (point {point})")]
    NonFinite { layer: usize, point: usize },

    #[error("training loss diverged (non-finite) at epoch {epoch}")]
    Diverged { epoch: usize },

    #[error("pattern length mismatch: expected {expected} bits, got {got}")]
    PatternLength { expected: usize, got: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("input set is empty")]
    EmptyInput,

    #[error("graph too small: largest component has {component} nodes, need more than {needed}")]
    GraphTooSmall { component: usize, needed: usize },

    #[error("degenerate component: largest connected component has fewer than 2 nodes")]
    DegenerateComponent,

    #[error("eigensolver failed to converge: residual {residual} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },

    #[error("unsupported format version {found}, expected {expected}")]
    UnsupportedVersion { found: u64, expected: u64 },

    #[error("malformed data: {0}")]
    Malformed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}
