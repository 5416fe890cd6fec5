use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("k = {k} out of range for {n} entries (need 1 <= k <= n)")]
    KOutOfRange { k: usize, n: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("bad memory data: {0}")]
    BadMemory(String),
    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, KnnError>;
