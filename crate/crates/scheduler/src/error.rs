use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchedError {
    #[error("instance infeasible: {0}")]
    Infeasible(String),
    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),
    #[error("bad input: {0}")]
    BadInput(String),
    #[error(transparent)]
    Port(#[from] port_model::PortError),
    #[error("continuous subproblem failed: {0}")]
    Continuous(String),
}

pub type Result<T> = std::result::Result<T, SchedError>;
