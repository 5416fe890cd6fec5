use thiserror::Error;

#[derive(Debug, Error)]
pub enum PortError {
    #[error("bad input: {0}")]
    BadInput(String),
    #[error("statically infeasible instance: {}", reasons.join("; "))]
    StaticInfeasible { reasons: Vec<String> },
    #[error("vessel {vessel}: charging demand {demand} MWh cannot be met (deliverable {deliverable} MWh)")]
    ChargeDemandInfeasible { vessel: usize, demand: f64, deliverable: f64 },
    #[error("fixture error: {0}")]
    Fixture(String),
}

pub type Result<T> = std::result::Result<T, PortError>;
