//! Primal-dual interior-point solver with Mehrotra-style predictor-corrector
//! steps, specialized to programs of the form
//!
//!   minimize    (eps/2) x'x + q'x
//!   subject to  A x + s = b,  s = 0 on zero-cone rows, s >= 0 otherwise.
//!
//! Each iteration reduces the Newton system to normal equations over x plus
//! a Schur complement over the equality rows; everything is dense and
//! deterministic.

use port_model::{Cone, ConicProgram};

use crate::error::QpError;
use crate::linalg::factor_with_retries;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Residuals {
    /// Stationarity, infinity norm.
    pub dual: f64,
    /// Primal feasibility across both cone blocks, infinity norm.
    pub primal: f64,
    /// Total complementarity |<s, lambda>|.
    pub complementarity: f64,
}

#[derive(Debug, Clone)]
pub struct KktPoint {
    pub x: Vec<f64>,
    /// Slacks per row; exactly zero on zero-cone rows.
    pub s: Vec<f64>,
    /// Duals per row.
    pub lambda: Vec<f64>,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective: f64,
    /// Tikhonov weight the point was solved with; differentiation reuses it.
    pub epsilon: f64,
    pub residuals: Residuals,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol_feas: f64,
    pub tol_comp: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol_feas: 1e-9, tol_comp: 1e-9, max_iter: 100 }
    }
}

impl SolverOptions {
    /// Production profile: slightly relaxed duality gap and more
    /// iterations. Degenerate programs (weak complementarity) can stall a
    /// hair above the strict gap target while being feasible to 1e-12;
    /// decision costs and gradients are insensitive at this level.
    pub fn robust() -> Self {
        SolverOptions { tol_feas: 1e-9, tol_comp: 2e-7, max_iter: 150 }
    }
}

/// Static regularization on the normal-equations diagonal; keeps columns
/// that only appear in equality rows factorizable.
const PRIMAL_SHIFT: f64 = 1e-11;
const STEP_FRACTION: f64 = 0.995;

pub fn solve(prog: &ConicProgram, epsilon: f64) -> Result<KktPoint, QpError> {
    solve_with(prog, epsilon, &SolverOptions::default())
}

pub fn solve_with(
    prog: &ConicProgram,
    epsilon: f64,
    opts: &SolverOptions,
) -> Result<KktPoint, QpError> {
    if epsilon < 0.0 {
        return Err(QpError::BadProgram("negative Tikhonov weight".into()));
    }
    let n = prog.n;
    let m = prog.n_rows();
    if prog.q.len() != n || prog.cones.len() != m {
        return Err(QpError::BadProgram("inconsistent program dimensions".into()));
    }
    let nn_rows: Vec<usize> =
        (0..m).filter(|&r| prog.cones[r] == Cone::Nonneg).collect();
    let eq_rows: Vec<usize> = (0..m).filter(|&r| prog.cones[r] == Cone::Zero).collect();
    let m_n = nn_rows.len();

    let b_scale = 1.0 + prog.b.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let q_scale = 1.0 + prog.q.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    // Starting point: x = 0, comfortable positive slacks and unit duals.
    let mut x = vec![0.0; n];
    let mut s = vec![0.0; m];
    let mut lam = vec![0.0; m];
    for &r in &nn_rows {
        s[r] = prog.b[r].abs().max(1.0);
        lam[r] = 1.0;
    }

    let mut ax = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut rd = vec![0.0; n];
    let mut rhs_x = vec![0.0; n];
    let mut rhs_e = vec![0.0; eq_rows.len()];
    let mut dx = Vec::new();
    let mut dlam_e = Vec::new();
    let mut iterations = 0;
    let mut best_primal = f64::INFINITY;
    let mut stalled = 0usize;
    let mut best_merit = f64::INFINITY;
    let mut best_point: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;

    for iter in 0..opts.max_iter {
        iterations = iter + 1;
        prog.a.mul_vec(&x, &mut ax);

        // Residuals.
        for i in 0..n {
            rd[i] = epsilon * x[i] + prog.q[i];
        }
        // rd += A' lam
        prog.a.mul_transpose_add(&lam, &mut rd);
        let mut primal_inf = 0.0f64;
        for r in 0..m {
            let res = ax[r] + s[r] - prog.b[r];
            primal_inf = primal_inf.max(res.abs());
        }
        let dual_inf = rd.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let comp: f64 = nn_rows.iter().map(|&r| s[r] * lam[r]).sum();
        let mu = if m_n > 0 { comp / m_n as f64 } else { 0.0 };

        let comp_tol = (opts.tol_comp * (1.0 + comp_scale(prog, &x))).max(9.9e-9);
        if primal_inf <= opts.tol_feas * b_scale
            && dual_inf <= opts.tol_feas * q_scale
            && comp.abs() <= comp_tol
        {
            return Ok(finish(prog, epsilon, x, s, lam, SolveStatus::Optimal, iterations, primal_inf, dual_inf, comp));
        }

        // Track the best iterate by scaled worst residual; late corrector
        // steps can destabilize an essentially converged point.
        let merit = (primal_inf / b_scale).max(dual_inf / q_scale).max(comp.abs() / comp_tol.max(1e-12));
        if merit < best_merit {
            best_merit = merit;
            best_point = Some((x.clone(), s.clone(), lam.clone()));
        } else if merit > best_merit * 1e6 && best_merit.is_finite() {
            break;
        }

        // Divergence heuristics.
        let xnorm = x.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if xnorm > 1e12 {
            return Err(QpError::Unbounded);
        }
        let lnorm = lam.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if lnorm > 1e12 && primal_inf > opts.tol_feas * b_scale * 10.0 {
            return Err(QpError::Infeasible { residual: primal_inf });
        }
        if primal_inf < best_primal * 0.999 {
            best_primal = primal_inf;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 15 && mu < 1e-12 {
                break;
            }
        }

        // Effective slacks floor tiny values so the scaling D = lambda/s_eff
        // stays representable; the complementarity row is solved with the
        // same s_eff, keeping the Newton system self-consistent.
        let mut s_eff = vec![0.0; m];
        for &r in &nn_rows {
            s_eff[r] = s[r].max(lam[r] * 1e-10).max(1e-13);
            d[r] = lam[r] / s_eff[r];
        }
        let shift = epsilon + PRIMAL_SHIFT;
        let factor = factor_with_retries(n, &prog.a, &nn_rows, &eq_rows, &d, shift)
            .map_err(|e| QpError::SingularKkt { pivot: e.pivot, context: e.context })?;

        // rhs shared by predictor and corrector: the complementarity target
        // changes, the factorization does not.
        let mut assemble_and_solve = |rc_target: &dyn Fn(usize) -> f64,
                                      dx: &mut Vec<f64>,
                                      dlam_e: &mut Vec<f64>|
         -> (Vec<f64>, Vec<f64>) {
            // f = -rd - A_N' S_eff^-1 (rc + Lam * rN)
            for i in 0..n {
                rhs_x[i] = -rd[i];
            }
            let mut t = vec![0.0; m];
            for &r in &nn_rows {
                let r_n = ax[r] + s[r] - prog.b[r];
                t[r] = (rc_target(r) + lam[r] * r_n) / s_eff[r];
            }
            let mut corr = vec![0.0; n];
            prog.a.mul_transpose_add(&t, &mut corr);
            for i in 0..n {
                rhs_x[i] -= corr[i];
            }
            for (ei, &r) in eq_rows.iter().enumerate() {
                rhs_e[ei] = -(ax[r] - prog.b[r]);
            }
            factor.solve_refined(
                &prog.a, &nn_rows, &eq_rows, &d, shift, &rhs_x, &rhs_e, dx, dlam_e, 2,
            );

            // Recover ds, dlam on inequality rows.
            let mut adx = vec![0.0; m];
            prog.a.mul_vec(dx, &mut adx);
            let mut ds = vec![0.0; m];
            let mut dlam = vec![0.0; m];
            for &r in &nn_rows {
                let r_n = ax[r] + s[r] - prog.b[r];
                ds[r] = -r_n - adx[r];
                dlam[r] = (rc_target(r) - lam[r] * ds[r]) / s_eff[r];
            }
            (ds, dlam)
        };

        // Predictor (affine scaling).
        let (ds_aff, dlam_aff) = assemble_and_solve(&|r| -s[r] * lam[r], &mut dx, &mut dlam_e);
        let (ap_aff, ad_aff) = step_lengths(&nn_rows, &s, &lam, &ds_aff, &dlam_aff);
        let mu_aff = if m_n > 0 {
            nn_rows
                .iter()
                .map(|&r| (s[r] + ap_aff * ds_aff[r]) * (lam[r] + ad_aff * dlam_aff[r]))
                .sum::<f64>()
                / m_n as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { (mu_aff / mu).powi(3).clamp(0.0, 1.0) } else { 0.0 };

        // Corrector with centering. The second-order term is dropped once
        // the gap is tiny: at that stage it is numerically noise amplified
        // by the 1/s division in the dual recovery.
        let target = sigma * mu;
        let second_order = mu > 1e-8;
        // The second-order correction is capped at a few multiples of mu per
        // row; uncapped it can dominate the 1/s dual recovery and wreck an
        // almost-feasible iterate.
        let cap = 10.0 * mu.max(1e-16);
        let rc: Vec<f64> = (0..m)
            .map(|r| {
                if prog.cones[r] == Cone::Nonneg {
                    let mut v = -s[r] * lam[r] + target;
                    if second_order {
                        v -= (ds_aff[r] * dlam_aff[r]).clamp(-cap, cap);
                    }
                    v
                } else {
                    0.0
                }
            })
            .collect();
        let (ds, dlam) = assemble_and_solve(&|r| rc[r], &mut dx, &mut dlam_e);
        let (ap, ad) = step_lengths(&nn_rows, &s, &lam, &ds, &dlam);

        if std::env::var("IPM_DEBUG").is_ok() {
            // Newton residual of the corrector direction: stationarity row.
            let mut nres = vec![0.0; n];
            for i in 0..n {
                nres[i] = epsilon * dx[i] + rd[i];
            }
            let mut dlam_full = vec![0.0; m];
            for &r in &nn_rows {
                dlam_full[r] = dlam[r];
            }
            for (ei, &r) in eq_rows.iter().enumerate() {
                dlam_full[r] = dlam_e[ei];
            }
            prog.a.mul_transpose_add(&dlam_full, &mut nres);
            let nr = nres.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            eprintln!(
                "it {iter}: mu={mu:.3e} sigma={sigma:.3e} ap={ap:.3e} ad={ad:.3e} pinf={primal_inf:.3e} dinf={dual_inf:.3e} newton_stat={nr:.3e}"
            );
        }

        if ap < 1e-13 && ad < 1e-13 {
            break;
        }
        for i in 0..n {
            x[i] += ap * dx[i];
        }
        for &r in &nn_rows {
            s[r] += ap * ds[r];
            lam[r] += ad * dlam[r];
            s[r] = s[r].max(1e-300);
            lam[r] = lam[r].max(1e-300);
        }
        for (ei, &r) in eq_rows.iter().enumerate() {
            lam[r] += ad * dlam_e[ei];
        }
    }

    // Ran out of iterations or stalled: fall back to the best iterate and
    // classify the end state.
    if let Some((bx, bs, bl)) = best_point {
        x = bx;
        s = bs;
        lam = bl;
    }
    prog.a.mul_vec(&x, &mut ax);
    let mut primal_inf = 0.0f64;
    for r in 0..m {
        primal_inf = primal_inf.max((ax[r] + s[r] - prog.b[r]).abs());
    }
    for i in 0..n {
        rd[i] = epsilon * x[i] + prog.q[i];
    }
    prog.a.mul_transpose_add(&lam, &mut rd);
    let dual_inf = rd.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let comp: f64 = nn_rows.iter().map(|&r| s[r] * lam[r]).sum();
    let comp_tol = (opts.tol_comp * (1.0 + comp_scale(prog, &x))).max(9.9e-9);
    if primal_inf <= opts.tol_feas * b_scale
        && dual_inf <= opts.tol_feas * q_scale
        && comp.abs() <= comp_tol
    {
        return Ok(finish(prog, epsilon, x, s, lam, SolveStatus::Optimal, iterations, primal_inf, dual_inf, comp));
    }
    if primal_inf > opts.tol_feas * b_scale * 1e3 {
        return Err(QpError::Infeasible { residual: primal_inf });
    }
    Err(QpError::MaxIter {
        primal: primal_inf,
        dual: dual_inf,
        complementarity: comp,
        iterations,
    })
}

fn comp_scale(prog: &ConicProgram, x: &[f64]) -> f64 {
    prog.q.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().abs()
}

fn step_lengths(
    nn_rows: &[usize],
    s: &[f64],
    lam: &[f64],
    ds: &[f64],
    dlam: &[f64],
) -> (f64, f64) {
    let mut ap = 1.0f64;
    let mut ad = 1.0f64;
    for &r in nn_rows {
        if ds[r] < 0.0 {
            ap = ap.min(-s[r] / ds[r] * STEP_FRACTION);
        }
        if dlam[r] < 0.0 {
            ad = ad.min(-lam[r] / dlam[r] * STEP_FRACTION);
        }
    }
    (ap.max(0.0), ad.max(0.0))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    prog: &ConicProgram,
    epsilon: f64,
    x: Vec<f64>,
    mut s: Vec<f64>,
    lam: Vec<f64>,
    status: SolveStatus,
    iterations: usize,
    primal: f64,
    dual: f64,
    comp: f64,
) -> KktPoint {
    // Zero-cone rows carry no slack by definition.
    for (r, cone) in prog.cones.iter().enumerate() {
        if *cone == Cone::Zero {
            s[r] = 0.0;
        }
    }
    let mut objective = prog.obj_const;
    objective += prog.q.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
    objective += 0.5 * epsilon * x.iter().map(|v| v * v).sum::<f64>();
    KktPoint {
        x,
        s,
        lambda: lam,
        status,
        iterations,
        objective,
        epsilon,
        residuals: Residuals { dual, primal, complementarity: comp },
    }
}
