//! Seeded generator of random parameterized LP/QP instances, shared by the
//! gradient-check suites and the `gradcheck` CLI. Programs are boxed so they
//! are always bounded, and instances with degenerate optima are rejected by
//! the callers via [`strictly_complementary`].

use autodiff::rng::SplitMix64;
use port_model::{Cone, ConicProgram, ParamMaps, SparseMat};

use crate::ipm::KktPoint;

/// A random bounded LP: n variables in a box, a few general inequality rows
/// and optionally one equality row. All of q and b are parameterized, plus
/// every structural entry of the general rows.
pub fn random_parameterized_lp(rng: &mut SplitMix64, with_equality: bool) -> ConicProgram {
    let n = 2 + rng.below(8); // up to 10 vars keeps FD sweeps quick
    let m_gen = 1 + rng.below(6);
    let x0: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();

    let mut a = SparseMat::builder(n);
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut maps = ParamMaps::default();

    // Box rows: -2.5 <= x_i <= 2.5 (not parameterized).
    for i in 0..n {
        a.push_row(&[(i, 1.0)]);
        b.push(2.5);
        cones.push(Cone::Nonneg);
        a.push_row(&[(i, -1.0)]);
        b.push(2.5);
        cones.push(Cone::Nonneg);
    }

    // eta = [q (n), b_gen (m_gen), A entries (nnz of general rows)]
    let mut eta_cursor = n + m_gen;

    for g in 0..m_gen {
        let nnz = 2 + rng.below(n.min(3));
        let mut cols: Vec<usize> = (0..n).collect();
        rng.shuffle(&mut cols);
        cols.truncate(nnz);
        cols.sort_unstable();
        let terms: Vec<(usize, f64)> =
            cols.iter().map(|&c| (c, rng.uniform(-1.0, 1.0))).collect();
        let row = a.push_row_structural(&terms);
        let ax0: f64 = terms.iter().map(|&(c, v)| v * x0[c]).sum();
        let slack = rng.uniform(0.2, 1.5);
        b.push(ax0 + slack);
        cones.push(Cone::Nonneg);
        maps.b.push(((n + g) as u32, row as u32, 1.0));
        for &(c, _) in &terms {
            maps.a.push((eta_cursor as u32, row as u32, c as u32, 1.0));
            eta_cursor += 1;
        }
    }

    if with_equality {
        let terms: Vec<(usize, f64)> = (0..n.min(3)).map(|c| (c, rng.uniform(-1.0, 1.0))).collect();
        let ax0: f64 = terms.iter().map(|&(c, v)| v * x0[c]).sum();
        a.push_row(&terms);
        b.push(ax0);
        cones.push(Cone::Zero);
    }

    let q: Vec<f64> = (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect();
    for i in 0..n {
        maps.q.push((i as u32, i as u32, 1.0));
    }

    ConicProgram {
        n,
        tikhonov: 0.0,
        q,
        a: a.finish(),
        b,
        cones,
        obj_const: 0.0,
        param_dim: eta_cursor,
        maps,
    }
}

/// Strict complementarity margin: the smallest max(s_i, lambda_i) over
/// inequality rows. Small values flag (near-)degenerate optima.
pub fn strict_complementarity_margin(prog: &ConicProgram, pt: &KktPoint) -> f64 {
    let mut margin = f64::INFINITY;
    for (r, cone) in prog.cones.iter().enumerate() {
        if *cone == Cone::Nonneg {
            margin = margin.min(pt.s[r].max(pt.lambda[r]));
        }
    }
    margin
}
