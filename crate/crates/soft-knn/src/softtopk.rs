//! Closed-form soft-top-k mask.
//!
//! The smooth step phi(t) = 1 - exp(-t)/2 for t > 0, exp(t)/2 otherwise,
//! turns "select the k largest of x" into the threshold equation
//! S(lambda) = sum_i phi(x_i - lambda) = k. On each interval of the sorted
//! input the equation reduces to a quadratic in exp(lambda) whose positive
//! root has a closed form; prefix/suffix log-cumulative-exponentials keep
//! the evaluation stable, and the first root landing inside its interval is
//! the threshold. If no interval validates (degenerate inputs), the mask
//! falls back to all zeros and the caller treats the sample as skipped.

use crate::error::{KnnError, Result};

/// Smooth step centered at zero.
pub fn phi(t: f64) -> f64 {
    if t > 0.0 {
        1.0 - 0.5 * (-t).exp()
    } else {
        0.5 * t.exp()
    }
}

/// phi'(t) = exp(-|t|)/2, strictly positive.
pub fn phi_prime(t: f64) -> f64 {
    0.5 * (-t.abs()).exp()
}

#[derive(Debug, Clone)]
pub struct SoftTopK {
    pub weights: Vec<f64>,
    /// Threshold lambda*, when an interval validated.
    pub threshold: Option<f64>,
}

impl SoftTopK {
    pub fn is_fallback(&self) -> bool {
        self.threshold.is_none() && !self.weights.iter().all(|&w| w == 1.0)
    }
}

/// Computes the mask w with sum(w) = k. Requesting k = n returns the
/// all-ones mask (the threshold diverges in that limit).
pub fn soft_topk(x: &[f64], k: usize) -> Result<SoftTopK> {
    let n = x.len();
    if k == 0 || k > n {
        return Err(KnnError::KOutOfRange { k, n });
    }
    if k == n {
        eprintln!("warning: soft_topk with k = n returns the all-ones mask");
        return Ok(SoftTopK { weights: vec![1.0; n], threshold: None });
    }

    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    // Prefix log-sum-exp of sorted values (inclusive) and suffix
    // log-sum-exp of their negations (exclusive).
    let mut lse1 = vec![0.0; n];
    let mut acc = f64::NEG_INFINITY;
    for (p, &v) in sorted.iter().enumerate() {
        acc = log_add(acc, v);
        lse1[p] = acc;
    }
    let mut lse2 = vec![f64::NEG_INFINITY; n];
    let mut acc = f64::NEG_INFINITY;
    for p in (0..n).rev() {
        lse2[p] = acc; // strictly after p
        acc = log_add(acc, -sorted[p]);
    }

    let mut lambda = None;
    // Below-minimum interval (empty prefix): S(lambda) = n - exp(lambda)*B/2
    // with B the full negated sum, so lambda = ln(2(n-k)) - logsumexp(-x).
    {
        let mut lse_neg = f64::NEG_INFINITY;
        for &v in &sorted {
            lse_neg = log_add(lse_neg, -v);
        }
        let cand = (2.0 * (n - k) as f64).ln() - lse_neg;
        if cand <= sorted[0] {
            lambda = Some(cand);
        }
    }
    for p in 0..n {
        if lambda.is_some() {
            break;
        }
        let delta = k as f64 - (n - 1 - p) as f64;
        let cand = if lse2[p] == f64::NEG_INFINITY {
            // Empty suffix: the quadratic degenerates to 2*delta*y = A.
            if delta <= 0.0 {
                continue;
            }
            lse1[p] - (2.0 * delta).ln()
        } else {
            // lambda = (lse1 - lse2)/2 - asinh(delta * exp(-(lse1+lse2)/2)),
            // an exact rearrangement of log(A) - log(sqrt(delta^2 + A B) + delta)
            // that neither overflows nor cancels.
            let s = lse1[p] + lse2[p];
            0.5 * (lse1[p] - lse2[p]) - (delta * (-0.5 * s).exp()).asinh()
        };
        let upper = if p + 1 < n { sorted[p + 1] } else { f64::INFINITY };
        if cand >= sorted[p] && cand <= upper {
            lambda = Some(cand);
            break;
        }
    }

    let Some(lambda) = lambda else {
        return Ok(SoftTopK { weights: vec![0.0; n], threshold: None });
    };
    let weights = x.iter().map(|&v| phi(v - lambda)).collect();
    Ok(SoftTopK { weights, threshold: Some(lambda) })
}

/// Cotangent of the input given a cotangent on the mask, differentiating
/// through the threshold by the implicit-function rule:
/// d lambda = sum_j phi'_j dx_j / sum_j phi'_j.
pub fn soft_topk_backward(x: &[f64], result: &SoftTopK, w_bar: &[f64]) -> Vec<f64> {
    let n = x.len();
    let Some(lambda) = result.threshold else {
        return vec![0.0; n]; // fallback (or k = n): constant mask
    };
    let primes: Vec<f64> = x.iter().map(|&v| phi_prime(v - lambda)).collect();
    let total: f64 = primes.iter().sum();
    let weighted: f64 = w_bar.iter().zip(&primes).map(|(g, p)| g * p).sum();
    x.iter()
        .enumerate()
        .map(|(i, _)| primes[i] * (w_bar[i] - weighted / total))
        .collect()
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_inputs_share_the_mask() {
        let r = soft_topk(&[0.3, 0.3, 0.3, 0.3], 1).unwrap();
        for &w in &r.weights {
            assert!((w - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn mask_sums_to_k() {
        let x = [0.7, -1.2, 0.01, 3.4, -0.5, 2.2, 0.0];
        for k in 1..x.len() {
            let r = soft_topk(&x, k).unwrap();
            let sum: f64 = r.weights.iter().sum();
            assert!((sum - k as f64).abs() < 1e-9, "k {k}: sum {sum}");
        }
    }

    #[test]
    fn separated_inputs_recover_hard_selection() {
        let r = soft_topk(&[100.0, 0.0, -100.0], 1).unwrap();
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
        assert!(r.weights[0] >= 1.0 - 1e-6);
    }

    #[test]
    fn huge_spread_stays_finite() {
        // Euclidean similarities can span hundreds of units.
        let x = [-350.0, -20.0, 0.0, 410.0];
        let r = soft_topk(&x, 2).unwrap();
        assert!(r.threshold.is_some());
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 2.0).abs() < 1e-9, "sum {sum}");
    }

    #[test]
    fn k_equals_n_returns_ones() {
        let r = soft_topk(&[1.0, 2.0], 2).unwrap();
        assert_eq!(r.weights, vec![1.0, 1.0]);
    }

    #[test]
    fn k_out_of_range_errors() {
        assert!(soft_topk(&[1.0, 2.0], 0).is_err());
        assert!(soft_topk(&[1.0, 2.0], 3).is_err());
    }
}
