use thiserror::Error;

#[derive(Debug, Error)]
pub enum AdError {
    #[error("shape mismatch at node {node}: {msg}")]
    Shape { node: usize, msg: String },
    #[error("non-finite value produced by node {node} ({op})")]
    NonFinite { node: usize, op: String },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("loss node must be scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("unknown input slot '{0}'")]
    UnknownInput(String),
    #[error("input slot '{0}' not bound")]
    UnboundInput(String),
    #[error("custom node kind '{0}' already registered")]
    DuplicateCustomKind(String),
    #[error("custom node kind '{0}' not registered")]
    UnknownCustomKind(String),
    #[error("custom node '{op}' failed: {msg}")]
    Custom { op: String, msg: String },
    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, AdError>;
