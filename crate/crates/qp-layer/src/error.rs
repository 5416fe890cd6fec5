use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("problem is primal infeasible (residual {residual:.3e})")]
    Infeasible { residual: f64 },
    #[error("problem is unbounded below")]
    Unbounded,
    #[error("iteration limit hit after {iterations} iterations (primal {primal:.3e}, dual {dual:.3e}, comp {complementarity:.3e})")]
    MaxIter { primal: f64, dual: f64, complementarity: f64, iterations: usize },
    #[error("singular KKT system in {context} (smallest pivot {pivot:.3e}); raise the Tikhonov weight and re-solve")]
    SingularKkt { pivot: f64, context: &'static str },
    #[error("bad program: {0}")]
    BadProgram(String),
    #[error("differentiation requires an Optimal point, got {0}")]
    NotOptimal(String),
}

pub type Result<T> = std::result::Result<T, QpError>;
