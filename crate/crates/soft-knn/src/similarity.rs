//! Similarity metrics and their vector-Jacobian products. All three act on
//! whatever space the caller hands them (the surrogate standardizes first).

use crate::memory::Metric;

/// Score of a query against one row. Cosine scores a zero-norm vector pair
/// as 0 rather than dividing by zero.
pub fn score(metric: Metric, query: &[f64], row: &[f64]) -> f64 {
    match metric {
        Metric::Cosine => cosine(query, row),
        Metric::Euclidean => {
            -query.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        }
        Metric::DiffCosine => {
            let dq = diff(query);
            let dr = diff(row);
            cosine(&dq, &dr)
        }
    }
}

/// d score / d query contracted with a scalar cotangent, accumulated into
/// `out`.
pub fn score_vjp(metric: Metric, query: &[f64], row: &[f64], cot: f64, out: &mut [f64]) {
    if cot == 0.0 {
        return;
    }
    match metric {
        Metric::Cosine => cosine_vjp(query, row, cot, out),
        Metric::Euclidean => {
            for ((o, &q), &r) in out.iter_mut().zip(query).zip(row) {
                *o += cot * (-2.0) * (q - r);
            }
        }
        Metric::DiffCosine => {
            let dq = diff(query);
            let dr = diff(row);
            let mut grad_dq = vec![0.0; dq.len()];
            cosine_vjp(&dq, &dr, cot, &mut grad_dq);
            // transpose of the first-difference operator
            for (i, g) in grad_dq.iter().enumerate() {
                out[i + 1] += g;
                out[i] -= g;
            }
        }
    }
}

fn diff(x: &[f64]) -> Vec<f64> {
    x.windows(2).map(|w| w[1] - w[0]).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot(a, b) / (na * nb)
}

fn cosine_vjp(a: &[f64], b: &[f64], cot: f64, out: &mut [f64]) {
    let na = norm(a);
    let nb = norm(b);
    if na == 0.0 || nb == 0.0 {
        return;
    }
    let s = dot(a, b) / (na * nb);
    // d s / d a = b / (|a||b|) - s a / |a|^2
    for ((o, &av), &bv) in out.iter_mut().zip(a).zip(b) {
        *o += cot * (bv / (na * nb) - s * av / (na * na));
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
