//! Implicit differentiation of the optimum through the linearized KKT
//! system. Given a cotangent dL/dx*, the transposed system
//!
//!   [ P   A'  0    ]' [y1]   [dL/dx*]
//!   [ A   I   0    ]  [y2] = [0]
//!   [ 0   Lam S    ]  [y3]   [0]
//!
//! is reduced to the same normal-equations-plus-Schur structure the solver
//! uses (y2 = D * A_N y1 on inequality rows with D = lambda/s, equality rows
//! kept as a saddle block), then contracted with the constant parameter maps
//! of the program to give dL/d(eta).

use port_model::{Cone, ConicProgram};

use crate::error::QpError;
use crate::ipm::{KktPoint, SolveStatus};
use crate::linalg::factor_with_retries;

/// Complementarity smoothing floors: slacks are floored rather than rows
/// pruned, so weakly-active rows keep finite (large) weights.
const SLACK_FLOOR: f64 = 1e-11;
const WEIGHT_CAP: f64 = 1e12;

pub fn differentiate(
    prog: &ConicProgram,
    pt: &KktPoint,
    cotangent: &[f64],
) -> Result<Vec<f64>, QpError> {
    if pt.status != SolveStatus::Optimal {
        return Err(QpError::NotOptimal(format!("{:?}", pt.status)));
    }
    let n = prog.n;
    let m = prog.n_rows();
    if cotangent.len() != n {
        return Err(QpError::BadProgram(format!(
            "cotangent length {} != n {}",
            cotangent.len(),
            n
        )));
    }
    let nn_rows: Vec<usize> = (0..m).filter(|&r| prog.cones[r] == Cone::Nonneg).collect();
    let eq_rows: Vec<usize> = (0..m).filter(|&r| prog.cones[r] == Cone::Zero).collect();

    let mut d = vec![0.0; m];
    for &r in &nn_rows {
        let s = pt.s[r].max(SLACK_FLOOR);
        d[r] = (pt.lambda[r].max(0.0) / s).min(WEIGHT_CAP);
    }
    let factor = factor_with_retries(n, &prog.a, &nn_rows, &eq_rows, &d, pt.epsilon + 1e-11)
        .map_err(|e| QpError::SingularKkt { pivot: e.pivot, context: e.context })?;

    let zeros = vec![0.0; eq_rows.len()];
    let mut y1 = Vec::new();
    let mut y2e = Vec::new();
    factor.solve(&prog.a, &eq_rows, cotangent, &zeros, &mut y1, &mut y2e);

    // Refinement rounds on the saddle residual tighten y under the extreme
    // row weights near active constraints.
    let mut resid_x = cotangent.to_vec();
    let mut a_y1 = vec![0.0; m];
    prog.a.mul_vec(&y1, &mut a_y1);
    let mut y2 = vec![0.0; m];
    for &r in &nn_rows {
        y2[r] = d[r] * a_y1[r];
    }
    for (ei, &r) in eq_rows.iter().enumerate() {
        y2[r] = y2e[ei];
    }
    for _ in 0..3 {
        resid_x.copy_from_slice(cotangent);
        let mut at_y2 = vec![0.0; n];
        prog.a.mul_transpose_add(&y2, &mut at_y2);
        for i in 0..n {
            resid_x[i] -= pt.epsilon * y1[i] + at_y2[i];
        }
        let resid_e: Vec<f64> = eq_rows.iter().map(|&r| -a_y1[r]).collect();
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        factor.solve(&prog.a, &eq_rows, &resid_x, &resid_e, &mut c1, &mut c2);
        for i in 0..n {
            y1[i] += c1[i];
        }
        for (ei, _) in eq_rows.iter().enumerate() {
            y2e[ei] += c2[ei];
        }
        prog.a.mul_vec(&y1, &mut a_y1);
        for &r in &nn_rows {
            y2[r] = d[r] * a_y1[r];
        }
        for (ei, &r) in eq_rows.iter().enumerate() {
            y2[r] = y2e[ei];
        }
    }

    // Contract with the parameter maps: dL/deta = -Jeta' y.
    let mut grad = vec![0.0; prog.param_dim];
    for &(p, i, c) in &prog.maps.q {
        grad[p as usize] -= c * y1[i as usize];
    }
    for &(p, r, col, c) in &prog.maps.a {
        let r = r as usize;
        let col = col as usize;
        grad[p as usize] -= c * (pt.lambda[r] * y1[col] + pt.x[col] * y2[r]);
    }
    for &(p, r, c) in &prog.maps.b {
        grad[p as usize] += c * y2[r as usize];
    }
    Ok(grad)
}
