//! Momentum-free adaptive optimizer: per-parameter RMS scaling of the data
//! gradient. The consolidation quadratic is applied as an exact proximal
//! update after each step (diagonal precision), which stays contractive for
//! any penalty scale -- the anchored point is a true fixed point as the
//! scale grows.

use crate::fisher::FisherState;

#[derive(Debug, Clone)]
pub struct RmsOptimizer {
    pub lr: f64,
    pub decay: f64,
    v: Vec<f64>,
    eps: f64,
}

impl RmsOptimizer {
    pub fn new(dim: usize, lr: f64) -> Self {
        RmsOptimizer { lr, decay: 0.9, v: vec![0.0; dim], eps: 1e-8 }
    }

    /// One adaptive step on the data gradient, in place.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(theta.len(), grad.len());
        for i in 0..theta.len() {
            self.v[i] = self.decay * self.v[i] + (1.0 - self.decay) * grad[i] * grad[i];
            theta[i] -= self.lr * grad[i] / (self.v[i].sqrt() + self.eps);
        }
    }

    /// Proximal pull toward the anchor under the diagonal precision:
    /// theta_i <- (theta_i + lr * s * P_ii * anchor_i) / (1 + lr * s * P_ii).
    pub fn apply_ewc_prox(&self, theta: &mut [f64], state: &FisherState, scale: f64) {
        if scale == 0.0 {
            return;
        }
        for i in 0..theta.len() {
            let w = self.lr * scale * state.effective_diag(i);
            theta[i] = (theta[i] + w * state.anchor[i]) / (1.0 + w);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisher::{FisherMode, FisherState};

    #[test]
    fn step_descends_a_quadratic() {
        let mut theta = vec![4.0, -3.0];
        let mut opt = RmsOptimizer::new(2, 0.05);
        for _ in 0..2000 {
            let grad: Vec<f64> = theta.iter().map(|t| 2.0 * t).collect();
            opt.step(&mut theta, &grad);
        }
        assert!(theta.iter().all(|t| t.abs() < 0.05), "{theta:?}");
    }

    #[test]
    fn huge_penalty_pins_parameters_to_the_anchor() {
        let mut state = FisherState::empty(3, FisherMode::Diagonal).unwrap();
        state.anchor = vec![1.0, -2.0, 0.5];
        state.diag = vec![2.0, 0.0, 1.0]; // one direction only ridge-constrained
        state.betas.push(1.0);
        let mut theta = state.anchor.clone();
        let mut opt = RmsOptimizer::new(3, 1e-3);
        for step in 0..500 {
            let grad: Vec<f64> = (0..3).map(|i| ((step + i) % 7) as f64 - 3.0).collect();
            opt.step(&mut theta, &grad);
            opt.apply_ewc_prox(&mut theta, &state, 1e9);
        }
        for (t, a) in theta.iter().zip(&state.anchor) {
            assert!((t - a).abs() <= 1e-3, "moved {} from {}", t, a);
        }
    }
}
