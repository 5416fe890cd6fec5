//! Independent dense two-phase simplex used as an oracle for the interior
//! point solver. Deliberately shares no code with the implementation under
//! test: plain tableau with Bland's rule.

use port_model::{Cone, ConicProgram};

const EPS: f64 = 1e-9;

/// Solves min q'x s.t. Ax + s = b (s >= 0 on Nonneg rows, s = 0 on Zero
/// rows), x free. Returns (x, objective), or None when infeasible or
/// unbounded. Only for LPs (tikhonov ignored).
pub fn simplex_oracle(prog: &ConicProgram) -> Option<(Vec<f64>, f64)> {
    let n = prog.n;
    let m = prog.n_rows();
    let n_slack = prog.cones.iter().filter(|c| **c == Cone::Nonneg).count();
    // Columns: u(n) | v(n) | slacks(n_slack) | artificials(m).
    let width = 2 * n + n_slack + m;
    let mut tab = vec![vec![0.0; width + 1]; m];
    let mut slack_col = vec![usize::MAX; m];
    let mut si = 0;
    for r in 0..m {
        let flip = prog.b[r] < 0.0;
        let sgn = if flip { -1.0 } else { 1.0 };
        for (c, v) in prog.a.row(r) {
            tab[r][c] += sgn * v;
            tab[r][n + c] -= sgn * v;
        }
        if prog.cones[r] == Cone::Nonneg {
            slack_col[r] = 2 * n + si;
            tab[r][2 * n + si] = sgn;
            si += 1;
        }
        tab[r][2 * n + n_slack + r] = 1.0; // artificial
        tab[r][width] = sgn * prog.b[r];
    }

    let mut basis: Vec<usize> = (0..m).map(|r| 2 * n + n_slack + r).collect();

    // Phase 1: minimize the sum of artificials.
    let mut cost1 = vec![0.0; width];
    for r in 0..m {
        cost1[2 * n + n_slack + r] = 1.0;
    }
    let feasible = run_simplex(&mut tab, &mut basis, &cost1, width, |col| col < width);
    if !feasible {
        return None;
    }
    let phase1: f64 = basis
        .iter()
        .enumerate()
        .filter(|(_, &c)| c >= 2 * n + n_slack)
        .map(|(r, _)| tab[r][width])
        .sum();
    if phase1 > 1e-7 {
        return None; // infeasible
    }
    // Drive remaining artificials out of the basis where possible.
    for r in 0..m {
        if basis[r] >= 2 * n + n_slack {
            if let Some(c) = (0..2 * n + n_slack).find(|&c| tab[r][c].abs() > EPS) {
                pivot(&mut tab, &mut basis, r, c, width);
            }
        }
    }

    // Phase 2: original costs on u and v, artificials banned.
    let mut cost2 = vec![0.0; width];
    for i in 0..n {
        cost2[i] = prog.q[i];
        cost2[n + i] = -prog.q[i];
    }
    let bounded = run_simplex(&mut tab, &mut basis, &cost2, width, |col| col < 2 * n + n_slack);
    if !bounded {
        return None; // unbounded
    }

    let mut x = vec![0.0; n];
    for (r, &c) in basis.iter().enumerate() {
        if c < n {
            x[c] += tab[r][width];
        } else if c < 2 * n {
            x[c - n] -= tab[r][width];
        }
    }
    let obj: f64 = prog.q.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + prog.obj_const;
    Some((x, obj))
}

/// Returns false on unbounded. Bland's rule for both choices.
fn run_simplex(
    tab: &mut [Vec<f64>],
    basis: &mut [usize],
    cost: &[f64],
    width: usize,
    allowed: impl Fn(usize) -> bool,
) -> bool {
    let m = tab.len();
    loop {
        // Reduced costs: c_j - c_B' B^-1 A_j, computed from the tableau.
        let mut entering = None;
        for j in 0..width {
            if !allowed(j) || basis.contains(&j) {
                continue;
            }
            let mut red = cost[j];
            for r in 0..m {
                red -= cost[basis[r]] * tab[r][j];
            }
            if red < -EPS {
                entering = Some(j);
                break; // Bland: smallest index
            }
        }
        let Some(e) = entering else { return true };
        let mut leaving = None;
        let mut best = f64::INFINITY;
        for r in 0..m {
            if tab[r][e] > EPS {
                let ratio = tab[r][width] / tab[r][e];
                if ratio < best - EPS || (ratio < best + EPS && leaving.map_or(true, |lr: usize| basis[r] < basis[lr])) {
                    best = ratio;
                    leaving = Some(r);
                }
            }
        }
        let Some(l) = leaving else { return false };
        pivot(tab, basis, l, e, width);
    }
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize, width: usize) {
    let p = tab[row][col];
    for v in tab[row].iter_mut() {
        *v /= p;
    }
    for r in 0..tab.len() {
        if r == row {
            continue;
        }
        let f = tab[r][col];
        if f.abs() > 0.0 {
            for j in 0..=width {
                tab[r][j] -= f * tab[row][j];
            }
        }
    }
    basis[row] = col;
}
