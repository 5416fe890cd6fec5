//! The full differentiable surrogate: standardize the query with memory
//! statistics, score it against every stored feature row, soft-top-k the
//! scores, normalize to convex weights, and blend the stored labels. The
//! whole chain is differentiated analytically and exposed as a custom
//! autodiff node with outputs (crane power, berthing surface, fallback flag).

use std::sync::Arc;

use autodiff::{CustomOp, Tensor};

use crate::error::{KnnError, Result};
use crate::memory::{MemorySet, WEIGHT_NORM_EPS};
use crate::similarity::{score, score_vjp};
use crate::softtopk::{soft_topk, soft_topk_backward, SoftTopK};

/// Raw similarity scores of a query (in memory-standardized space).
pub fn similarity(mem: &MemorySet, query_raw: &[f64]) -> Result<Vec<f64>> {
    if query_raw.len() != mem.feat_dim() {
        return Err(KnnError::Dimension(format!(
            "query length {} vs feature width {}",
            query_raw.len(),
            mem.feat_dim()
        )));
    }
    let z = mem.standardize(query_raw);
    let rows = mem.standardized_feature_rows();
    Ok(rows.iter().map(|r| score(mem.metric, &z, r)).collect())
}

/// Convex-combination outputs from a raw (unnormalized) mask.
pub struct Aggregate {
    pub qc: Vec<f64>,
    pub berthing: Vec<f64>,
    /// All-zero mask: outputs are zeros and the sample should be skipped
    /// for gradient purposes.
    pub fallback: bool,
}

pub fn aggregate(mem: &MemorySet, weights: &[f64]) -> Result<Aggregate> {
    if weights.len() != mem.len() {
        return Err(KnnError::Dimension(format!(
            "weights length {} vs memory size {}",
            weights.len(),
            mem.len()
        )));
    }
    let total: f64 = weights.iter().sum();
    let mut qc = vec![0.0; mem.qc_dim()];
    let mut berthing = vec![0.0; mem.v_dim()];
    if total <= 0.0 {
        return Ok(Aggregate { qc, berthing, fallback: true });
    }
    let denom = total + WEIGHT_NORM_EPS;
    for (i, &w) in weights.iter().enumerate() {
        let alpha = w / denom;
        if alpha == 0.0 {
            continue;
        }
        for (o, &l) in qc.iter_mut().zip(mem.label_qc_row(i)) {
            *o += alpha * l;
        }
        for (o, &l) in berthing.iter_mut().zip(mem.label_v_row(i)) {
            *o += alpha * l;
        }
    }
    // Convex blends of [0,1] labels stay in [0,1] up to roundoff.
    for b in berthing.iter_mut() {
        *b = b.clamp(0.0, 1.0);
    }
    Ok(Aggregate { qc, berthing, fallback: false })
}

pub struct SurrogateOutput {
    pub qc: Vec<f64>,
    pub berthing: Vec<f64>,
    pub fallback: bool,
    scores: Vec<f64>,
    mask: SoftTopK,
}

/// Forward pass, keeping the intermediates the backward needs.
pub fn surrogate_forward(mem: &MemorySet, query_raw: &[f64]) -> Result<SurrogateOutput> {
    mem.validate_k()?;
    let scores = similarity(mem, query_raw)?;
    let mask = soft_topk(&scores, mem.k)?;
    let agg = aggregate(mem, &mask.weights)?;
    Ok(SurrogateOutput { qc: agg.qc, berthing: agg.berthing, fallback: agg.fallback, scores, mask })
}

/// d(loss)/d(query) given cotangents on the two outputs.
pub fn surrogate_backward(
    mem: &MemorySet,
    query_raw: &[f64],
    out: &SurrogateOutput,
    qc_bar: &[f64],
    v_bar: &[f64],
) -> Vec<f64> {
    let m = mem.len();
    if out.fallback {
        return vec![0.0; query_raw.len()];
    }
    // alpha_bar per entry from the two blends.
    let mut alpha_bar = vec![0.0; m];
    for i in 0..m {
        let mut acc = 0.0;
        for (g, &l) in qc_bar.iter().zip(mem.label_qc_row(i)) {
            acc += g * l;
        }
        for (g, &l) in v_bar.iter().zip(mem.label_v_row(i)) {
            acc += g * l;
        }
        alpha_bar[i] = acc;
    }
    // Through the normalization alpha = w / (sum w + eps).
    let total: f64 = out.mask.weights.iter().sum();
    let denom = total + WEIGHT_NORM_EPS;
    let inner: f64 =
        alpha_bar.iter().zip(&out.mask.weights).map(|(g, w)| g * w).sum::<f64>() / (denom * denom);
    let w_bar: Vec<f64> = alpha_bar.iter().map(|g| g / denom - inner).collect();
    // Through the soft-top-k threshold.
    let s_bar = soft_topk_backward(&out.scores, &out.mask, &w_bar);
    // Through the similarity metric into standardized space, then undo the
    // z-score scaling.
    let z = mem.standardize(query_raw);
    let rows = mem.standardized_feature_rows();
    let mut z_bar = vec![0.0; z.len()];
    for (row, &g) in rows.iter().zip(&s_bar) {
        score_vjp(mem.metric, &z, row, g, &mut z_bar);
    }
    let mut q_bar = z_bar;
    for (g, s) in q_bar.iter_mut().zip(mem.std_devs()) {
        *g /= s;
    }
    q_bar
}

/// Custom autodiff node wrapping the surrogate. Outputs: crane power
/// profile, berthing surface, fallback flag (1.0 when the mask collapsed).
pub struct SurrogateOp {
    mem: Arc<MemorySet>,
}

impl SurrogateOp {
    /// The memory must have fresh standardization stats.
    pub fn new(mem: Arc<MemorySet>) -> Self {
        SurrogateOp { mem }
    }
}

impl CustomOp for SurrogateOp {
    fn name(&self) -> &str {
        "soft_knn_surrogate"
    }

    fn num_outputs(&self) -> usize {
        3
    }

    fn forward(&self, inputs: &[&Tensor]) -> std::result::Result<Vec<Tensor>, String> {
        let query = inputs[0].data();
        let out = surrogate_forward(&self.mem, query).map_err(|e| e.to_string())?;
        Ok(vec![
            Tensor::vector(out.qc),
            Tensor::vector(out.berthing),
            Tensor::scalar(if out.fallback { 1.0 } else { 0.0 }),
        ])
    }

    fn backward(
        &self,
        inputs: &[&Tensor],
        _outputs: &[Tensor],
        out_cotangents: &[Tensor],
    ) -> std::result::Result<Vec<Tensor>, String> {
        let query = inputs[0].data();
        // Re-run the cheap forward to recover intermediates.
        let out = surrogate_forward(&self.mem, query).map_err(|e| e.to_string())?;
        let grad = surrogate_backward(
            &self.mem,
            query,
            &out,
            out_cotangents[0].data(),
            out_cotangents[1].data(),
        );
        Ok(vec![Tensor::new(inputs[0].shape().to_vec(), grad)])
    }
}
