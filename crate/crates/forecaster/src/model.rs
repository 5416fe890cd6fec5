//! The forecasting model: per-vessel embeddings run through one
//! self-attention block and mean pooling into a fixed-length code that is
//! concatenated with the context features and mapped by a two-hidden-layer
//! MLP onto the forecast horizon. Outputs live in per-slot z-space and are
//! denormalized with statistics stored in the checkpoint.

use std::collections::BTreeMap;

use autodiff::rng::SplitMix64;
use autodiff::{Graph, NodeRef, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{ForecastError, Result};
use crate::features::VESSEL_FEATURES;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Forecast horizon (output length).
    pub t_out: usize,
    pub ctx_dim: usize,
    pub embed_dim: usize,
    pub attn_dim: usize,
    pub hidden: usize,
}

impl ModelConfig {
    pub fn desk_scale(t_out: usize, ctx_dim: usize) -> Self {
        ModelConfig { t_out, ctx_dim, embed_dim: 32, attn_dim: 32, hidden: 64 }
    }

    /// Tiny configuration for gradient-check suites.
    pub fn tiny(t_out: usize, ctx_dim: usize) -> Self {
        ModelConfig { t_out, ctx_dim, embed_dim: 4, attn_dim: 4, hidden: 6 }
    }
}

/// Normalization statistics learned from the training split.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Normalization {
    pub ctx_mean: Vec<f64>,
    pub ctx_std: Vec<f64>,
    /// Per-slot target statistics over training windows.
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

impl Normalization {
    pub fn identity(ctx_dim: usize, t_out: usize) -> Self {
        Normalization {
            ctx_mean: vec![0.0; ctx_dim],
            ctx_std: vec![1.0; ctx_dim],
            target_mean: vec![0.0; t_out],
            target_std: vec![1.0; t_out],
        }
    }

    /// Z-score statistics from training contexts and targets.
    pub fn fit(contexts: &[Vec<f64>], targets: &[Vec<f64>]) -> Self {
        let fit_dim = |rows: &[Vec<f64>], d: usize| -> (Vec<f64>, Vec<f64>) {
            let n = rows.len().max(1) as f64;
            let mut mean = vec![0.0; d];
            for r in rows {
                for (m, v) in mean.iter_mut().zip(r) {
                    *m += v;
                }
            }
            for m in mean.iter_mut() {
                *m /= n;
            }
            let mut std = vec![0.0; d];
            for r in rows {
                for ((s, v), m) in std.iter_mut().zip(r).zip(&mean) {
                    *s += (v - m) * (v - m);
                }
            }
            for s in std.iter_mut() {
                *s = (*s / n).sqrt();
                if *s < 1e-9 {
                    *s = 1.0;
                }
            }
            (mean, std)
        };
        let (ctx_mean, ctx_std) = fit_dim(contexts, contexts.first().map_or(0, |c| c.len()));
        let (target_mean, target_std) = fit_dim(targets, targets.first().map_or(0, |t| t.len()));
        Normalization { ctx_mean, ctx_std, target_mean, target_std }
    }
}

#[derive(Debug, Clone)]
pub struct ForecastModel {
    pub config: ModelConfig,
    pub params: BTreeMap<String, Tensor>,
    pub norm: Normalization,
}

pub const CHECKPOINT_VERSION: u32 = 1;

impl ForecastModel {
    /// Seeded uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut rng = SplitMix64::new(seed);
        let mut params = BTreeMap::new();
        fn mat(
            params: &mut BTreeMap<String, Tensor>,
            rng: &mut SplitMix64,
            name: &str,
            rows: usize,
            cols: usize,
        ) {
            let bound = 1.0 / (rows as f64).sqrt();
            let data = (0..rows * cols).map(|_| rng.uniform(-bound, bound)).collect();
            params_insert(params, name, Tensor::matrix(rows, cols, data));
        }
        fn vecp(params: &mut BTreeMap<String, Tensor>, name: &str, len: usize) {
            params_insert(params, name, Tensor::vector(vec![0.0; len]));
        }
        let c = &config;
        mat(&mut params, &mut rng, "embed_w", VESSEL_FEATURES, c.embed_dim);
        vecp(&mut params, "embed_b", c.embed_dim);
        mat(&mut params, &mut rng, "attn_wq", c.embed_dim, c.attn_dim);
        mat(&mut params, &mut rng, "attn_wk", c.embed_dim, c.attn_dim);
        mat(&mut params, &mut rng, "attn_wv", c.embed_dim, c.attn_dim);
        {
            let bound = 1.0 / (c.embed_dim as f64).sqrt();
            let data = (0..c.attn_dim).map(|_| rng.uniform(-bound, bound)).collect();
            params_insert(&mut params, "null_embed", Tensor::vector(data));
        }
        mat(&mut params, &mut rng, "head_w1", c.attn_dim + c.ctx_dim, c.hidden);
        vecp(&mut params, "head_b1", c.hidden);
        mat(&mut params, &mut rng, "head_w2", c.hidden, c.hidden);
        vecp(&mut params, "head_b2", c.hidden);
        mat(&mut params, &mut rng, "head_w3", c.hidden, c.t_out);
        vecp(&mut params, "head_b3", c.t_out);
        ForecastModel {
            norm: Normalization::identity(config.ctx_dim, config.t_out),
            config,
            params,
        }
    }

    /// Adds this model's parameters and forward pass to a graph. `prefix`
    /// namespaces the parameter slots; `vessels` is a row-major J x 10
    /// matrix of scaled vessel features (possibly empty).
    pub fn wire(
        &self,
        g: &mut Graph,
        prefix: &str,
        ctx_raw: &[f64],
        vessels: &[f64],
    ) -> Result<NodeRef> {
        if ctx_raw.len() != self.config.ctx_dim {
            return Err(ForecastError::Layout(format!(
                "context length {} != configured {}",
                ctx_raw.len(),
                self.config.ctx_dim
            )));
        }
        if vessels.len() % VESSEL_FEATURES != 0 {
            return Err(ForecastError::Layout("vessel matrix width".into()));
        }
        let n_vessels = vessels.len() / VESSEL_FEATURES;

        // Declare every parameter up front: slots the forward pass does not
        // touch (e.g. the null embedding when vessels are present) still
        // receive zero gradients from backward.
        let mut slots: BTreeMap<&str, NodeRef> = BTreeMap::new();
        for (name, value) in &self.params {
            slots.insert(name.as_str(), g.param(&format!("{prefix}.{name}"), value.clone()));
        }
        let param = |name: &str| -> NodeRef { slots[name] };

        // Standardized context as a constant.
        let ctx_z: Vec<f64> = ctx_raw
            .iter()
            .zip(self.norm.ctx_mean.iter().zip(&self.norm.ctx_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        let ctx = g.constant(Tensor::vector(ctx_z));

        let pooled = if n_vessels == 0 {
            param("null_embed")
        } else {
            let vm = g.constant(Tensor::matrix(n_vessels, VESSEL_FEATURES, vessels.to_vec()));
            let ew = param("embed_w");
            let eb = param("embed_b");
            let pre = g.affine(vm, ew, eb);
            let emb = g.tanh(pre);
            let wq = param("attn_wq");
            let wk = param("attn_wk");
            let wv = param("attn_wv");
            let zero_attn = g.constant(Tensor::vector(vec![0.0; self.config.attn_dim]));
            let q = g.affine(emb, wq, zero_attn);
            let k = g.affine(emb, wk, zero_attn);
            let v = g.affine(emb, wv, zero_attn);
            let att = g.attention(q, k, v);
            // Mean pooling over vessels as a 1 x J times J x d product.
            let ones = g.constant(Tensor::matrix(
                1,
                n_vessels,
                vec![1.0 / n_vessels as f64; n_vessels],
            ));
            let zero_pool = g.constant(Tensor::vector(vec![0.0; self.config.attn_dim]));
            let pooled2d = g.affine(ones, att, zero_pool);
            g.slice(pooled2d, 0, self.config.attn_dim)
        };

        let h0 = g.concat(&[pooled, ctx]);
        let w1 = param("head_w1");
        let b1 = param("head_b1");
        let a1 = g.affine(h0, w1, b1);
        let h1 = g.tanh(a1);
        let w2 = param("head_w2");
        let b2 = param("head_b2");
        let a2 = g.affine(h1, w2, b2);
        let h2 = g.tanh(a2);
        let w3 = param("head_w3");
        let b3 = param("head_b3");
        let z_out = g.affine(h2, w3, b3);

        // Denormalize: y = z * sigma + mu.
        let sigma = g.constant(Tensor::vector(self.norm.target_std.clone()));
        let scaled = g.mul(z_out, sigma);
        let out = g.lincomb(&[(1.0, scaled)], Some(Tensor::vector(self.norm.target_mean.clone())));
        Ok(out)
    }

    /// Standalone forward pass.
    pub fn predict(&self, ctx_raw: &[f64], vessels: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let out = self.wire(&mut g, "m", ctx_raw, vessels)?;
        g.mark_output("forecast", out);
        let outs = g.forward(&BTreeMap::new()).map_err(ForecastError::Graph)?;
        Ok(outs["forecast"].data().to_vec())
    }

    /// Flat parameter vector in name order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for t in self.params.values() {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn unflatten(&mut self, theta: &[f64]) -> Result<()> {
        let total: usize = self.params.values().map(|t| t.len()).sum();
        if theta.len() != total {
            return Err(ForecastError::Layout(format!(
                "flat parameter length {} != {}",
                theta.len(),
                total
            )));
        }
        let mut off = 0;
        for t in self.params.values_mut() {
            let len = t.len();
            t.data_mut().copy_from_slice(&theta[off..off + len]);
            off += len;
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.params.values().map(|t| t.len()).sum()
    }

    /// (name, offset, len) layout of the flat vector.
    pub fn param_layout(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        let mut off = 0;
        for (name, t) in &self.params {
            out.push((name.clone(), off, t.len()));
            off += t.len();
        }
        out
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct File<'a> {
            version: u32,
            config: &'a ModelConfig,
            norm: &'a Normalization,
            params: String,
        }
        serde_json::to_string(&File {
            version: CHECKPOINT_VERSION,
            config: &self.config,
            norm: &self.norm,
            params: autodiff::checkpoint::to_json(&self.params),
        })
        .expect("checkpoint serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct File {
            version: u32,
            config: ModelConfig,
            norm: Normalization,
            params: String,
        }
        let f: File = serde_json::from_str(s).map_err(|e| ForecastError::Checkpoint(e.to_string()))?;
        if f.version != CHECKPOINT_VERSION {
            return Err(ForecastError::Checkpoint(format!("unsupported version {}", f.version)));
        }
        let params = autodiff::checkpoint::from_json(&f.params)
            .map_err(|e| ForecastError::Checkpoint(e.to_string()))?;
        Ok(ForecastModel { config: f.config, params, norm: f.norm })
    }
}

fn params_insert(params: &mut BTreeMap<String, Tensor>, name: &str, t: Tensor) {
    params.insert(name.to_string(), t);
}

/// Mean squared error.
pub fn mse(predicted: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    predicted.iter().zip(actual).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
        / predicted.len() as f64
}

/// Mean absolute error, the reporting metric for forecast accuracy.
pub fn mae(predicted: &[f64], actual: &[f64]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    predicted.iter().zip(actual).map(|(a, b)| (a - b).abs()).sum::<f64>() / predicted.len() as f64
}
