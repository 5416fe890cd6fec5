use thiserror::Error;

#[derive(Debug, Error)]
pub enum DfclError {
    #[error("sample skipped: {0}")]
    SampleSkipped(String),
    #[error("training diverged: {0}")]
    Diverged(String),
    #[error("mode/state mismatch: {0}")]
    BadState(String),
    #[error(transparent)]
    Graph(#[from] autodiff::AdError),
    #[error(transparent)]
    Forecast(#[from] forecaster::ForecastError),
    #[error(transparent)]
    Port(#[from] port_model::PortError),
    #[error(transparent)]
    Qp(#[from] qp_layer::QpError),
    #[error(transparent)]
    Sched(#[from] scheduler::SchedError),
    #[error(transparent)]
    Knn(#[from] soft_knn::KnnError),
}

pub type Result<T> = std::result::Result<T, DfclError>;
