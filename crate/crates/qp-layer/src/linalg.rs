//! Dense symmetric kernels used by both the interior-point iterations and
//! the adjoint solves: Cholesky on the reduced normal-equations matrix and a
//! Schur complement over the equality rows.

use port_model::SparseMat;

/// In-place Cholesky of the lower triangle of a row-major n x n buffer.
/// On failure returns the index of the first non-positive pivot, leaving the
/// offending reduced diagonal value at that position for diagnostics.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> Result<(), usize> {
    debug_assert_eq!(a.len(), n * n);
    for i in 0..n {
        let (before, from_i) = a.split_at_mut(i * n);
        let row_i = &mut from_i[..n];
        for j in 0..i {
            let row_j = &before[j * n..j * n + j + 1];
            let dot: f64 = row_i[..j].iter().zip(&row_j[..j]).map(|(x, y)| x * y).sum();
            row_i[j] = (row_i[j] - dot) / row_j[j];
        }
        let sumsq: f64 = row_i[..i].iter().map(|v| v * v).sum();
        let d = row_i[i] - sumsq;
        if d <= 0.0 || !d.is_finite() {
            row_i[i] = d;
            return Err(i);
        }
        row_i[i] = d.sqrt();
    }
    Ok(())
}

/// Solves L L' x = b in place given the Cholesky factor in the lower triangle.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    // forward: L y = b
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let dot: f64 = row.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        b[i] = (b[i] - dot) / l[i * n + i];
    }
    // backward: L' x = y
    for i in (0..n).rev() {
        let mut acc = b[i];
        for k in (i + 1)..n {
            acc -= l[k * n + i] * b[k];
        }
        b[i] = acc / l[i * n + i];
    }
}

/// Factorization of the saddle system
///   [ M      A_E' ] [u]   [f]
///   [ A_E    0    ] [v] = [g]
/// with M = eps*I + delta*I + A_N' D A_N formed sparsely, M = L L', and the
/// equality block eliminated through W = A_E M^-1 A_E'.
pub struct SaddleFactor {
    pub n: usize,
    pub m_eq: usize,
    chol_m: Vec<f64>,
    /// X = M^-1 A_E', stored column-major per equality row (m_eq vectors of n).
    basis: Vec<f64>,
    chol_w: Vec<f64>,
}

pub struct SaddleError {
    pub pivot: f64,
    pub context: &'static str,
}

/// Builds the saddle factorization, escalating the diagonal shift when the
/// reduced matrix loses numerical positive-definiteness under extreme
/// complementarity scalings.
pub fn factor_with_retries(
    n: usize,
    a: &SparseMat,
    nonneg_rows: &[usize],
    eq_rows: &[usize],
    d: &[f64],
    base_shift: f64,
) -> Result<SaddleFactor, SaddleError> {
    let mut shift = base_shift.max(1e-12);
    let mut last = None;
    for _ in 0..5 {
        match SaddleFactor::new(n, a, nonneg_rows, eq_rows, d, shift) {
            Ok(f) => return Ok(f),
            Err(e) => {
                last = Some(e);
                shift *= 1e3;
            }
        }
    }
    Err(last.unwrap())
}

impl SaddleFactor {
    /// `a` is the full constraint matrix; `d` holds the diagonal scaling for
    /// every row but is only read on rows listed in `nonneg_rows`.
    pub fn new(
        n: usize,
        a: &SparseMat,
        nonneg_rows: &[usize],
        eq_rows: &[usize],
        d: &[f64],
        diag_shift: f64,
    ) -> Result<Self, SaddleError> {
        let mut m = vec![0.0; n * n];
        for i in 0..n {
            m[i * n + i] = diag_shift;
        }
        for &r in nonneg_rows {
            let dr = d[r];
            if dr == 0.0 {
                continue;
            }
            let lo = a.indptr[r];
            let hi = a.indptr[r + 1];
            for p in lo..hi {
                let (c1, v1) = (a.cols[p] as usize, a.vals[p]);
                let w = dr * v1;
                for pp in lo..hi {
                    let c2 = a.cols[pp] as usize;
                    if c2 <= c1 {
                        m[c1 * n + c2] += w * a.vals[pp];
                    }
                }
            }
        }
        // Mirror to the upper triangle is unnecessary: the factorization and
        // solves only touch the lower triangle.
        if let Err(i) = cholesky_in_place(&mut m, n) {
            return Err(SaddleError { pivot: m[i * n + i], context: "normal equations" });
        }

        let m_eq = eq_rows.len();
        let mut basis = vec![0.0; m_eq * n];
        let mut w = vec![0.0; m_eq * m_eq];
        if m_eq > 0 {
            for (ei, &r) in eq_rows.iter().enumerate() {
                let col = &mut basis[ei * n..(ei + 1) * n];
                for (c, v) in a.row(r) {
                    col[c] += v;
                }
                cholesky_solve(&m, n, col);
            }
            for (ei, &r) in eq_rows.iter().enumerate() {
                for ej in 0..=ei {
                    let colj = &basis[ej * n..(ej + 1) * n];
                    let mut acc = 0.0;
                    for (c, v) in a.row(r) {
                        acc += v * colj[c];
                    }
                    w[ei * m_eq + ej] = acc;
                }
                w[ei * m_eq + ei] += 1e-12;
            }
            if let Err(i) = cholesky_in_place(&mut w, m_eq) {
                return Err(SaddleError { pivot: w[i * m_eq + i], context: "equality Schur complement" });
            }
        }
        Ok(SaddleFactor { n, m_eq, chol_m: m, basis, chol_w: w })
    }

    /// y = (shift*I + A_N' D A_N) u + A_E' v computed sparsely, and
    /// r2 = A_E u; used by iterative refinement.
    #[allow(clippy::too_many_arguments)]
    fn apply(
        &self,
        a: &SparseMat,
        nonneg_rows: &[usize],
        eq_rows: &[usize],
        d: &[f64],
        shift: f64,
        u: &[f64],
        v: &[f64],
        out1: &mut [f64],
        out2: &mut [f64],
    ) {
        for (o, ui) in out1.iter_mut().zip(u) {
            *o = shift * ui;
        }
        for &r in nonneg_rows {
            if d[r] == 0.0 {
                continue;
            }
            let mut acc = 0.0;
            for (c, av) in a.row(r) {
                acc += av * u[c];
            }
            let w = d[r] * acc;
            for (c, av) in a.row(r) {
                out1[c] += av * w;
            }
        }
        for (ei, &r) in eq_rows.iter().enumerate() {
            let mut acc = 0.0;
            for (c, av) in a.row(r) {
                out1[c] += av * v[ei];
                acc += av * u[c];
            }
            out2[ei] = acc;
        }
    }

    /// Solve with iterative refinement against the true saddle operator
    /// (`shift`, `d`), which may differ from the factored one when the
    /// factorization needed an escalated shift or clamped weights.
    #[allow(clippy::too_many_arguments)]
    pub fn solve_refined(
        &self,
        a: &SparseMat,
        nonneg_rows: &[usize],
        eq_rows: &[usize],
        d: &[f64],
        shift: f64,
        f: &[f64],
        g: &[f64],
        u: &mut Vec<f64>,
        v: &mut Vec<f64>,
        rounds: usize,
    ) {
        self.solve(a, eq_rows, f, g, u, v);
        if rounds == 0 {
            return;
        }
        let mut r1 = vec![0.0; self.n];
        let mut r2 = vec![0.0; self.m_eq];
        let mut c1 = Vec::new();
        let mut c2 = Vec::new();
        for _ in 0..rounds {
            self.apply(a, nonneg_rows, eq_rows, d, shift, u, v, &mut r1, &mut r2);
            let mut worst = 0.0f64;
            for i in 0..self.n {
                r1[i] = f[i] - r1[i];
                worst = worst.max(r1[i].abs());
            }
            for ei in 0..self.m_eq {
                r2[ei] = g[ei] - r2[ei];
                worst = worst.max(r2[ei].abs());
            }
            if worst == 0.0 || !worst.is_finite() {
                break;
            }
            self.solve(a, eq_rows, &r1, &r2, &mut c1, &mut c2);
            for (ui, ci) in u.iter_mut().zip(&c1) {
                *ui += ci;
            }
            for (vi, ci) in v.iter_mut().zip(&c2) {
                *vi += ci;
            }
        }
    }

    /// Solves for (u, v) given the stacked right-hand side (f, g).
    pub fn solve(
        &self,
        a: &SparseMat,
        eq_rows: &[usize],
        f: &[f64],
        g: &[f64],
        u: &mut Vec<f64>,
        v: &mut Vec<f64>,
    ) {
        u.clear();
        u.extend_from_slice(f);
        cholesky_solve(&self.chol_m, self.n, u);
        v.clear();
        v.resize(self.m_eq, 0.0);
        if self.m_eq == 0 {
            return;
        }
        for (ei, &r) in eq_rows.iter().enumerate() {
            let mut acc = -g[ei];
            for (c, vv) in a.row(r) {
                acc += vv * u[c];
            }
            v[ei] = acc;
        }
        cholesky_solve(&self.chol_w, self.m_eq, v);
        for ei in 0..self.m_eq {
            let vei = v[ei];
            if vei == 0.0 {
                continue;
            }
            let col = &self.basis[ei * self.n..(ei + 1) * self.n];
            for (ui, ci) in u.iter_mut().zip(col) {
                *ui -= vei * ci;
            }
        }
    }
}
