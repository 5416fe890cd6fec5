//! Elastic-weight consolidation state: anchor parameters and accumulated
//! precision, approximated by the empirical Fisher information (mean outer
//! product of per-sample regret gradients). The prior's curvature is folded
//! into a constant diagonal ridge so the quadratic pull never has fully
//! unconstrained directions.

use serde::{Deserialize, Serialize};

use crate::error::{DfclError, Result};

pub const DEFAULT_PRIOR_RIDGE: f64 = 1e-4;
/// Full-matrix accumulation is only offered at small parameter counts.
pub const FULL_MATRIX_LIMIT: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherMode {
    Diagonal,
    Full,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FisherState {
    pub anchor: Vec<f64>,
    pub diag: Vec<f64>,
    /// Row-major d x d accumulation in Full mode.
    pub full: Option<Vec<f64>>,
    /// Per-task sample counts beta_t, in accumulation order.
    pub betas: Vec<f64>,
    pub mode: FisherMode,
    pub prior_ridge: f64,
}

impl FisherState {
    pub fn empty(dim: usize, mode: FisherMode) -> Result<Self> {
        if mode == FisherMode::Full && dim > FULL_MATRIX_LIMIT {
            return Err(DfclError::BadState(format!(
                "full Fisher accumulation capped at {FULL_MATRIX_LIMIT} parameters, got {dim}"
            )));
        }
        Ok(FisherState {
            anchor: vec![0.0; dim],
            diag: vec![0.0; dim],
            full: (mode == FisherMode::Full).then(|| vec![0.0; dim * dim]),
            betas: Vec::new(),
            mode,
            prior_ridge: DEFAULT_PRIOR_RIDGE,
        })
    }

    pub fn dim(&self) -> usize {
        self.anchor.len()
    }

    pub fn has_history(&self) -> bool {
        !self.betas.is_empty()
    }

    /// Adds beta * F_hat to the precision and moves the anchor.
    pub fn accumulate(&mut self, fisher: &FisherEstimate, beta: f64, new_anchor: &[f64]) -> Result<()> {
        if fisher.diag.len() != self.dim() || new_anchor.len() != self.dim() {
            return Err(DfclError::BadState("fisher dimension mismatch".into()));
        }
        for (p, f) in self.diag.iter_mut().zip(&fisher.diag) {
            *p += beta * f;
        }
        if let (Some(full), Some(ff)) = (self.full.as_mut(), fisher.full.as_ref()) {
            for (p, f) in full.iter_mut().zip(ff) {
                *p += beta * f;
            }
        }
        self.betas.push(beta);
        self.anchor.copy_from_slice(new_anchor);
        Ok(())
    }

    /// Effective diagonal precision including the prior ridge.
    pub fn effective_diag(&self, i: usize) -> f64 {
        self.diag[i] + self.prior_ridge
    }
}

#[derive(Debug, Clone)]
pub struct FisherEstimate {
    pub diag: Vec<f64>,
    pub full: Option<Vec<f64>>,
    pub n_samples: usize,
}

/// Mean outer product of per-sample gradients: diag entries are mean g_i^2;
/// Full mode also keeps the mean g g'.
pub fn estimate_fisher(grads: &[Vec<f64>], mode: FisherMode) -> Result<FisherEstimate> {
    let Some(first) = grads.first() else {
        return Err(DfclError::BadState("fisher estimation needs at least one gradient".into()));
    };
    let d = first.len();
    if mode == FisherMode::Full && d > FULL_MATRIX_LIMIT {
        return Err(DfclError::BadState(format!(
            "full Fisher accumulation capped at {FULL_MATRIX_LIMIT} parameters, got {d}"
        )));
    }
    let n = grads.len() as f64;
    let mut diag = vec![0.0; d];
    for g in grads {
        for (acc, v) in diag.iter_mut().zip(g) {
            *acc += v * v;
        }
    }
    for acc in diag.iter_mut() {
        *acc /= n;
    }
    let full = (mode == FisherMode::Full).then(|| {
        let mut m = vec![0.0; d * d];
        for g in grads {
            for i in 0..d {
                let gi = g[i];
                if gi == 0.0 {
                    continue;
                }
                for j in 0..d {
                    m[i * d + j] += gi * g[j];
                }
            }
        }
        for v in m.iter_mut() {
            *v /= n;
        }
        m
    });
    Ok(FisherEstimate { diag, full, n_samples: grads.len() })
}

/// Quadratic consolidation penalty (with its analytic gradient):
/// 0.5 * scale * (theta - anchor)' P (theta - anchor).
pub fn ewc_penalty(theta: &[f64], state: &FisherState, scale: f64) -> (f64, Vec<f64>) {
    assert_eq!(theta.len(), state.dim());
    let d = theta.len();
    let delta: Vec<f64> = theta.iter().zip(&state.anchor).map(|(t, a)| t - a).collect();
    match (&state.full, state.mode) {
        (Some(full), FisherMode::Full) => {
            let mut pd = vec![0.0; d];
            for i in 0..d {
                let mut acc = state.prior_ridge * delta[i];
                for j in 0..d {
                    acc += full[i * d + j] * delta[j];
                }
                pd[i] = acc;
            }
            let value = 0.5 * scale * delta.iter().zip(&pd).map(|(a, b)| a * b).sum::<f64>();
            let grad = pd.iter().map(|v| scale * v).collect();
            (value, grad)
        }
        _ => {
            let mut value = 0.0;
            let mut grad = vec![0.0; d];
            for i in 0..d {
                let p = state.effective_diag(i);
                value += 0.5 * scale * p * delta[i] * delta[i];
                grad[i] = scale * p * delta[i];
            }
            (value, grad)
        }
    }
}
