use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("{op}: shape mismatch {shapes:?}")]
    Shape { op: &'static str, shapes: Vec<Vec<usize>> },

    #[error("tensor data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },

    #[error("{op}: index {index} out of range for axis of size {size}")]
    Index { op: &'static str, index: usize, size: usize },

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    #[error("backward called on an empty tape")]
    EmptyTape,

    #[error("node {0} does not belong to this tape")]
    UnknownNode(usize),

    #[error("parameter `{0}` has no learning-rate group")]
    MissingGroup(String),

    #[error("parameter `{name}` assigned to unknown group `{group}`")]
    UnknownGroup { name: String, group: String },

    #[error("parameter `{name}` changed shape from {expected:?} to {found:?}")]
    StateShape { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("invalid contraction: {0}")]
    Contraction(String),
}
