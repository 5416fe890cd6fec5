//! Feature/label store behind the surrogate, with per-feature
//! standardization statistics and an optional FIFO capacity cap.

use serde::{Deserialize, Serialize};

use crate::error::{KnnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Cosine,
    Euclidean,
    DiffCosine,
}

pub const WEIGHT_NORM_EPS: f64 = 1e-8;
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct MemorySet {
    feat_dim: usize,
    qc_dim: usize,
    v_dim: usize,
    features: Vec<f64>,
    labels_qc: Vec<f64>,
    labels_v: Vec<f64>,
    pub metric: Metric,
    pub k: usize,
    /// FIFO eviction threshold; unlimited when None.
    pub capacity: Option<usize>,
    feat_mean: Vec<f64>,
    feat_std: Vec<f64>,
    stats_dirty: bool,
}

impl MemorySet {
    pub fn new(feat_dim: usize, qc_dim: usize, v_dim: usize, metric: Metric, k: usize) -> Self {
        MemorySet {
            feat_dim,
            qc_dim,
            v_dim,
            features: Vec::new(),
            labels_qc: Vec::new(),
            labels_v: Vec::new(),
            metric,
            k,
            capacity: None,
            feat_mean: vec![0.0; feat_dim],
            feat_std: vec![1.0; feat_dim],
            stats_dirty: true,
        }
    }

    pub fn len(&self) -> usize {
        if self.feat_dim == 0 {
            0
        } else {
            self.features.len() / self.feat_dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn feat_dim(&self) -> usize {
        self.feat_dim
    }

    pub fn qc_dim(&self) -> usize {
        self.qc_dim
    }

    pub fn v_dim(&self) -> usize {
        self.v_dim
    }

    pub fn push(&mut self, features: &[f64], label_qc: &[f64], label_v: &[f64]) -> Result<()> {
        if features.len() != self.feat_dim
            || label_qc.len() != self.qc_dim
            || label_v.len() != self.v_dim
        {
            return Err(KnnError::Dimension(format!(
                "entry dims ({}, {}, {}) vs memory ({}, {}, {})",
                features.len(),
                label_qc.len(),
                label_v.len(),
                self.feat_dim,
                self.qc_dim,
                self.v_dim
            )));
        }
        if !features.iter().all(|v| v.is_finite()) {
            return Err(KnnError::BadMemory("non-finite feature".into()));
        }
        if label_v.iter().any(|&b| b != 0.0 && b != 1.0) {
            return Err(KnnError::BadMemory("berthing labels must be binary".into()));
        }
        self.features.extend_from_slice(features);
        self.labels_qc.extend_from_slice(label_qc);
        self.labels_v.extend_from_slice(label_v);
        if let Some(cap) = self.capacity {
            while self.len() > cap {
                self.features.drain(0..self.feat_dim);
                self.labels_qc.drain(0..self.qc_dim);
                self.labels_v.drain(0..self.v_dim);
            }
        }
        self.stats_dirty = true;
        Ok(())
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feat_dim..(i + 1) * self.feat_dim]
    }

    pub fn label_qc_row(&self, i: usize) -> &[f64] {
        &self.labels_qc[i * self.qc_dim..(i + 1) * self.qc_dim]
    }

    pub fn label_v_row(&self, i: usize) -> &[f64] {
        &self.labels_v[i * self.v_dim..(i + 1) * self.v_dim]
    }

    /// Per-feature z-score statistics over the stored features; constant
    /// features get unit scale so standardization stays well-defined.
    pub fn refresh_stats(&mut self) {
        let m = self.len();
        if m == 0 {
            return;
        }
        for d in 0..self.feat_dim {
            let mut mean = 0.0;
            for i in 0..m {
                mean += self.features[i * self.feat_dim + d];
            }
            mean /= m as f64;
            let mut var = 0.0;
            for i in 0..m {
                let x = self.features[i * self.feat_dim + d] - mean;
                var += x * x;
            }
            var /= m as f64;
            self.feat_mean[d] = mean;
            self.feat_std[d] = if var.sqrt() > 1e-9 { var.sqrt() } else { 1.0 };
        }
        self.stats_dirty = false;
    }

    pub fn stats(&mut self) -> (&[f64], &[f64]) {
        if self.stats_dirty {
            self.refresh_stats();
        }
        (&self.feat_mean, &self.feat_std)
    }

    pub fn std_devs(&self) -> &[f64] {
        debug_assert!(!self.stats_dirty, "std_devs before refresh_stats");
        &self.feat_std
    }

    pub fn standardize(&self, raw: &[f64]) -> Vec<f64> {
        debug_assert!(!self.stats_dirty, "standardize before refresh_stats");
        raw.iter()
            .enumerate()
            .map(|(d, &v)| (v - self.feat_mean[d]) / self.feat_std[d])
            .collect()
    }

    pub fn standardized_feature_rows(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.standardize(self.feature_row(i))).collect()
    }

    pub fn validate_k(&self) -> Result<()> {
        if self.k == 0 || self.k > self.len() {
            return Err(KnnError::KOutOfRange { k: self.k, n: self.len() });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let file = MemoryFile {
            version: FORMAT_VERSION,
            metric: self.metric,
            k: self.k,
            feat_dim: self.feat_dim,
            qc_dim: self.qc_dim,
            v_dim: self.v_dim,
            features: self.features.clone(),
            labels_pqc: self.labels_qc.clone(),
            labels_v: self.labels_v.clone(),
        };
        serde_json::to_string(&file).expect("memory serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: MemoryFile = serde_json::from_str(s).map_err(|e| KnnError::Serde(e.to_string()))?;
        if file.version != FORMAT_VERSION {
            return Err(KnnError::Serde(format!("unsupported memory version {}", file.version)));
        }
        let mut mem = MemorySet::new(file.feat_dim, file.qc_dim, file.v_dim, file.metric, file.k);
        if file.feat_dim == 0
            || file.features.len() % file.feat_dim != 0
            || file.labels_pqc.len() % file.qc_dim.max(1) != 0
        {
            return Err(KnnError::Serde("inconsistent dimensions".into()));
        }
        let m = file.features.len() / file.feat_dim;
        for i in 0..m {
            mem.push(
                &file.features[i * file.feat_dim..(i + 1) * file.feat_dim],
                &file.labels_pqc[i * file.qc_dim..(i + 1) * file.qc_dim],
                &file.labels_v[i * file.v_dim..(i + 1) * file.v_dim],
            )?;
        }
        mem.refresh_stats();
        Ok(mem)
    }
}

#[derive(Serialize, Deserialize)]
struct MemoryFile {
    version: u32,
    metric: Metric,
    k: usize,
    feat_dim: usize,
    qc_dim: usize,
    v_dim: usize,
    features: Vec<f64>,
    labels_pqc: Vec<f64>,
    labels_v: Vec<f64>,
}
