//! Central finite differences, the independent oracle used by gradient
//! checks throughout the workspace (tests and the `gradcheck` CLI).

/// d f / d x_i by central differences with step h on every coordinate.
pub fn central_gradient(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let orig = xp[i];
        xp[i] = orig + h;
        let fp = f(&xp);
        xp[i] = orig - h;
        let fm = f(&xp);
        xp[i] = orig;
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Norm-wise relative error with an absolute floor for near-zero references.
pub fn rel_error(approx: &[f64], reference: &[f64], floor: f64) -> f64 {
    assert_eq!(approx.len(), reference.len());
    let diff: f64 = approx
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let norm: f64 = reference.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / norm.max(floor)
}

/// Largest elementwise relative error, with denominators floored.
pub fn max_entry_rel_error(approx: &[f64], reference: &[f64], floor: f64) -> f64 {
    assert_eq!(approx.len(), reference.len());
    approx
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).abs() / b.abs().max(floor))
        .fold(0.0, f64::max)
}
