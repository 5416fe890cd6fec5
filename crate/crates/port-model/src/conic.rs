//! Standard conic form shared by the day-ahead and real-time problems:
//!
//!   minimize    (eps/2) x'x + q'x + c0
//!   subject to  A x + s = b,  s_i = 0 on Zero rows, s_i >= 0 on Nonneg rows
//!
//! Problem data are affine in an external parameter vector eta; the constant
//! sparse maps dq/deta, dA/deta and db/deta are carried alongside the data so
//! the solver can push adjoints back onto eta.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    Zero,
    Nonneg,
}

/// CSR matrix. Rows are appended in order by the builders.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseMat {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub cols: Vec<u32>,
    pub vals: Vec<f64>,
}

impl SparseMat {
    pub fn builder(n_cols: usize) -> SparseMatBuilder {
        SparseMatBuilder {
            mat: SparseMat { n_rows: 0, n_cols, indptr: vec![0], cols: Vec::new(), vals: Vec::new() },
        }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.indptr[i];
        let hi = self.indptr[i + 1];
        self.cols[lo..hi].iter().zip(&self.vals[lo..hi]).map(|(&c, &v)| (c as usize, v))
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_cols);
        debug_assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = 0.0;
            for (c, v) in self.row(i) {
                acc += v * x[c];
            }
            y[i] = acc;
        }
    }

    /// y += A' x
    pub fn mul_transpose_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n_rows);
        debug_assert_eq!(y.len(), self.n_cols);
        for i in 0..self.n_rows {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            let lo = self.indptr[i];
            let hi = self.indptr[i + 1];
            for k in lo..hi {
                y[self.cols[k] as usize] += self.vals[k] * xi;
            }
        }
    }
}

pub struct SparseMatBuilder {
    mat: SparseMat,
}

impl SparseMatBuilder {
    /// Appends one row given (col, coeff) terms; zero coefficients are kept
    /// out of the structure.
    pub fn push_row(&mut self, terms: &[(usize, f64)]) -> usize {
        for &(c, v) in terms {
            debug_assert!(c < self.mat.n_cols);
            if v != 0.0 {
                self.mat.cols.push(c as u32);
                self.mat.vals.push(v);
            }
        }
        self.mat.indptr.push(self.mat.cols.len());
        self.mat.n_rows += 1;
        self.mat.n_rows - 1
    }

    /// Appends one row keeping every term structurally, including exact
    /// zeros. Rows whose coefficients depend on eta must use this so the
    /// parameter maps always point at existing entries.
    pub fn push_row_structural(&mut self, terms: &[(usize, f64)]) -> usize {
        for &(c, v) in terms {
            debug_assert!(c < self.mat.n_cols);
            self.mat.cols.push(c as u32);
            self.mat.vals.push(v);
        }
        self.mat.indptr.push(self.mat.cols.len());
        self.mat.n_rows += 1;
        self.mat.n_rows - 1
    }

    pub fn finish(self) -> SparseMat {
        self.mat
    }
}

/// Sparse constant derivatives of (q, A, b) with respect to eta.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParamMaps {
    /// q[idx] contains coeff * eta[param].
    pub q: Vec<(u32, u32, f64)>,
    /// A[row, col] contains coeff * eta[param].
    pub a: Vec<(u32, u32, u32, f64)>,
    /// b[row] contains coeff * eta[param].
    pub b: Vec<(u32, u32, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConicProgram {
    pub n: usize,
    /// Tikhonov weight: P = tikhonov * I.
    pub tikhonov: f64,
    pub q: Vec<f64>,
    pub a: SparseMat,
    pub b: Vec<f64>,
    pub cones: Vec<Cone>,
    /// Constant objective offset (reported, not optimized).
    pub obj_const: f64,
    pub param_dim: usize,
    pub maps: ParamMaps,
}

impl ConicProgram {
    pub fn n_rows(&self) -> usize {
        self.b.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let quad: f64 = 0.5 * self.tikhonov * x.iter().map(|v| v * v).sum::<f64>();
        let lin: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        quad + lin + self.obj_const
    }

    /// Applies a parameter perturbation through the constant maps, keeping
    /// the data affine in eta. Used to verify builder affinity and by tests.
    pub fn apply_param_delta(&mut self, delta: &[f64]) {
        assert_eq!(delta.len(), self.param_dim);
        for &(p, i, c) in &self.maps.q {
            self.q[i as usize] += c * delta[p as usize];
        }
        // A entries: the CSR stores structural entries for every mapped
        // coefficient, so we can update values in place.
        for &(p, r, ccol, c) in &self.maps.a {
            let d = c * delta[p as usize];
            if d == 0.0 {
                continue;
            }
            let lo = self.a.indptr[r as usize];
            let hi = self.a.indptr[r as usize + 1];
            let mut found = false;
            for k in lo..hi {
                if self.a.cols[k] == ccol {
                    self.a.vals[k] += d;
                    found = true;
                    break;
                }
            }
            assert!(found, "parameter map points at a structurally absent A entry");
        }
        for &(p, r, c) in &self.maps.b {
            self.b[r as usize] += c * delta[p as usize];
        }
    }
}
