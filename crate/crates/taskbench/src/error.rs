use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("data: {0}")]
    Data(String),
    #[error("config: {0}")]
    Config(String),
    #[error("metric: {0}")]
    Metric(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Port(#[from] port_model::PortError),
    #[error(transparent)]
    Dfcl(#[from] dfcl::DfclError),
    #[error(transparent)]
    Sched(#[from] scheduler::SchedError),
    #[error(transparent)]
    Knn(#[from] soft_knn::KnnError),
    #[error(transparent)]
    Forecast(#[from] forecaster::ForecastError),
}

pub type Result<T> = std::result::Result<T, BenchError>;
