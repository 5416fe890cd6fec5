//! Benchmark metrics: transfer gap, regret ratio, and the forgetting
//! measure over per-checkpoint regret histories.

use crate::error::{BenchError, Result};

/// (transfer - specific) / specific, in percent.
pub fn metric_gap(regret_transfer: f64, regret_specific: f64) -> Result<f64> {
    if regret_specific <= 0.0 {
        return Err(BenchError::Metric(format!(
            "gap needs a positive task-specific regret, got {regret_specific}"
        )));
    }
    Ok((regret_transfer - regret_specific) / regret_specific * 100.0)
}

/// Cumulative regret over cumulative perfect-foresight cost, in percent:
/// rr = regret / (cost - regret) * 100 with cost the realized total.
pub fn metric_rr(cum_regret: f64, cum_cost: f64) -> Result<f64> {
    if cum_cost <= cum_regret {
        return Err(BenchError::Metric(format!(
            "regret ratio needs cost {cum_cost} > regret {cum_regret}"
        )));
    }
    Ok(cum_regret / (cum_cost - cum_regret) * 100.0)
}

/// Forgetting measure at the last checkpoint of `history`, where
/// `history[i][j]` is the regret on task j evaluated with the parameters
/// held after checkpoint i (j <= i). For checkpoint k (0-based):
///   FM_k = (1/k) * sum_{j<k} [ R_k[j] - min_{i in [j, k-1]} R_i[j] ].
pub fn metric_fm(history: &[Vec<f64>]) -> Result<f64> {
    let k = history.len().checked_sub(1).ok_or_else(|| BenchError::Metric("empty history".into()))?;
    if k == 0 {
        return Err(BenchError::Metric("forgetting needs at least two checkpoints".into()));
    }
    let current = &history[k];
    if current.len() < k + 1 {
        return Err(BenchError::Metric("checkpoint row shorter than its index".into()));
    }
    let mut total = 0.0;
    for j in 0..k {
        let best = (j..k)
            .map(|i| history[i][j])
            .fold(f64::INFINITY, f64::min);
        total += current[j] - best;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rr_reproduces_reference_arithmetic() {
        // 3106.71 regret on a 71252.49 total cost -> 4.56%;
        // 3305.85 on 71451.64 -> 4.85%.
        let a = metric_rr(3106.71, 71252.49).unwrap();
        assert_eq!(format!("{a:.2}"), "4.56");
        let b = metric_rr(3305.85, 71451.64).unwrap();
        assert_eq!(format!("{b:.2}"), "4.85");
        assert_eq!(metric_rr(0.0, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn rr_guards_division() {
        assert!(metric_rr(10.0, 5.0).is_err());
    }

    #[test]
    fn gap_examples() {
        assert_eq!(metric_gap(100.0, 100.0).unwrap(), 0.0);
        assert!((metric_gap(105.0, 100.0).unwrap() - 5.0).abs() < 1e-12);
        assert!(metric_gap(1.0, 0.0).is_err());
    }

    #[test]
    fn fm_flat_history_is_zero() {
        let hist = vec![vec![100.0], vec![100.0, 90.0], vec![100.0, 90.0, 80.0]];
        assert_eq!(metric_fm(&hist[..2]).unwrap(), 0.0);
        assert_eq!(metric_fm(&hist).unwrap(), 0.0);
    }

    #[test]
    fn fm_single_degradation() {
        let hist = vec![vec![100.0], vec![110.0, 50.0]];
        assert!((metric_fm(&hist).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn fm_three_checkpoints_hand_computed() {
        // Task 0: best over checkpoints 0..=1 is 90, now 120 -> 30.
        // Task 1: best at checkpoint 1 is 70, now 65 -> -5.
        // FM = (30 - 5) / 2 = 12.5.
        let hist = vec![vec![100.0], vec![90.0, 70.0], vec![120.0, 65.0, 40.0]];
        assert!((metric_fm(&hist).unwrap() - 12.5).abs() < 1e-12);
    }

    #[test]
    fn fm_needs_two_checkpoints() {
        assert!(metric_fm(&[vec![1.0]]).is_err());
    }
}
