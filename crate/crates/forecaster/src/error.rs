use thiserror::Error;

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("feature layout mismatch: {0}")]
    Layout(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Graph(#[from] autodiff::AdError),
}

pub type Result<T> = std::result::Result<T, ForecastError>;
