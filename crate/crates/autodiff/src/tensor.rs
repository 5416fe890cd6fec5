use serde::{Deserialize, Serialize};

/// Dense row-major f64 tensor. Everything in this workspace is 64-bit;
/// QP duals and Fisher accumulation are too ill-conditioned for f32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        assert_eq!(
            shape.iter().product::<usize>(),
            data.len(),
            "tensor data length must equal product of shape"
        );
        Tensor { shape, data }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor { shape: vec![], data: vec![v] }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor { shape: vec![data.len()], data }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Tensor { shape: vec![rows, cols], data }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Tensor { shape: other.shape.clone(), data: vec![0.0; other.data.len()] }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Value of a scalar (or single-element) tensor.
    pub fn value(&self) -> f64 {
        assert_eq!(self.data.len(), 1, "value() requires a single-element tensor");
        self.data[0]
    }

    /// Rows/cols view for rank-1 (treated as a single row) and rank-2 tensors.
    pub fn rows_cols(&self) -> (usize, usize) {
        match self.shape.len() {
            0 => (1, 1),
            1 => (1, self.shape[0]),
            2 => (self.shape[0], self.shape[1]),
            _ => panic!("rows_cols() supports rank <= 2, got {:?}", self.shape),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
