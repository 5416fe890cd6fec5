//! Training loop over one task (or a union of tasks for the joint
//! baseline): statistical pretraining, decision-focused epochs through the
//! differentiable pipeline, optional layer freezing, and consolidation
//! updates at task boundaries.

use std::collections::BTreeMap;
use std::time::Instant;

use autodiff::rng::SplitMix64;
use autodiff::Tensor;
use forecaster::{ForecastModel, ModelConfig};

use crate::error::{DfclError, Result};
use crate::fisher::{estimate_fisher, ewc_penalty, FisherMode, FisherState};
use crate::optimizer::RmsOptimizer;
use crate::par::par_map;
use crate::pipeline::{build_pipeline_graph, SampleData, TaskContext};
use crate::regret::training_pf_cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainMode {
    /// Statistical baseline: squared-error training only.
    Sbl,
    /// Fresh decision-focused model per task.
    DflTaskwise,
    /// One decision-focused model fine-tuned across the stream, no
    /// forgetting mitigation.
    DflSequential,
    /// Sequential fine-tuning with all layers frozen except the output head.
    DfclFreeze,
    /// Sequential fine-tuning with Fisher-anchored consolidation.
    DfclEwc,
    /// Retrained from scratch on the union of all seen tasks.
    Joint,
}

impl TrainMode {
    pub fn parse(s: &str) -> Option<TrainMode> {
        Some(match s {
            "sbl" => TrainMode::Sbl,
            "dfl-taskwise" => TrainMode::DflTaskwise,
            "dfl-seq" => TrainMode::DflSequential,
            "dfcl-freeze" => TrainMode::DfclFreeze,
            "dfcl-ewc" => TrainMode::DfclEwc,
            "joint" => TrainMode::Joint,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Sbl => "sbl",
            TrainMode::DflTaskwise => "dfl-taskwise",
            TrainMode::DflSequential => "dfl-seq",
            TrainMode::DfclFreeze => "dfcl-freeze",
            TrainMode::DfclEwc => "dfcl-ewc",
            TrainMode::Joint => "joint",
        }
    }

    pub fn is_decision_focused(&self) -> bool {
        !matches!(self, TrainMode::Sbl)
    }
}

#[derive(Debug, Clone)]
pub struct Hyper {
    pub lr: f64,
    pub batch_size: usize,
    pub pretrain_epochs: usize,
    pub epochs: usize,
    /// Decision-focused samples drawn per epoch (rotating, seeded).
    pub samples_per_epoch: usize,
    /// Day pool the decision-focused phase draws from (seeded subset of the
    /// task's training days); 0 means the full set. Bounds the number of
    /// perfect-foresight pipeline solves.
    pub dfl_pool: usize,
    pub early_stop_patience: usize,
    pub ewc_scale: f64,
    pub eps_ladder: Vec<f64>,
    pub fisher_samples: usize,
    pub fisher_mode: FisherMode,
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            lr: 1e-3,
            batch_size: 8,
            pretrain_epochs: 40,
            epochs: 10,
            samples_per_epoch: 48,
            dfl_pool: 128,
            early_stop_patience: 20,
            ewc_scale: 1.0,
            eps_ladder: vec![1e-6, 1e-4],
            fisher_samples: 24,
            fisher_mode: FisherMode::Diagonal,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelPair {
    pub price: ForecastModel,
    pub load: ForecastModel,
}

impl ModelPair {
    pub fn init(t_out: usize, ctx_price_dim: usize, ctx_load_dim: usize, seed: u64) -> Self {
        ModelPair {
            price: ForecastModel::init(ModelConfig::desk_scale(t_out, ctx_price_dim), seed),
            load: ForecastModel::init(ModelConfig::desk_scale(t_out, ctx_load_dim), seed ^ 0x9e37),
        }
    }

    pub fn n_params(&self) -> usize {
        self.price.n_params() + self.load.n_params()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.price.flatten();
        out.extend(self.load.flatten());
        out
    }

    pub fn unflatten(&mut self, theta: &[f64]) -> Result<()> {
        let np = self.price.n_params();
        self.price.unflatten(&theta[..np])?;
        self.load.unflatten(&theta[np..])?;
        Ok(())
    }

    /// Trainability mask for the freeze baseline: only the output affine of
    /// each head stays live.
    pub fn head_only_mask(&self) -> Vec<bool> {
        let mut mask = Vec::with_capacity(self.n_params());
        for model in [&self.price, &self.load] {
            for (name, _, len) in model.param_layout() {
                let live = name == "head_w3" || name == "head_b3";
                mask.extend(std::iter::repeat_n(live, len));
            }
        }
        mask
    }

    /// Gathers a named-gradient map into the flat layout, zero-filling
    /// parameters absent from the map.
    pub fn flat_gradient(&self, grads: &BTreeMap<String, Tensor>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for (prefix, model) in [("price", &self.price), ("load", &self.load)] {
            for (name, _, len) in model.param_layout() {
                match grads.get(&format!("{prefix}.{name}")) {
                    Some(t) => out.extend_from_slice(t.data()),
                    None => out.extend(std::iter::repeat_n(0.0, len)),
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub mean_regret: f64,
    pub mse: f64,
    pub penalty: f64,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub rows: Vec<TrainLogRow>,
    pub skipped_samples: usize,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,mean_regret,mse,penalty,wall_ms\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                r.epoch, r.mean_regret, r.mse, r.penalty, r.wall_ms
            ));
        }
        out
    }
}

/// Per-sample gradient of the training-mode regret.
fn sample_regret_grad(
    pair: &ModelPair,
    ctx: &TaskContext,
    sample: &SampleData,
    eps_ladder: &[f64],
    pf_cost: f64,
) -> Result<(Vec<f64>, f64)> {
    let mut pg = build_pipeline_graph(ctx, &pair.price, &pair.load, sample, eps_ladder, pf_cost)?;
    let outs = pg.graph.forward(&BTreeMap::new())?;
    if outs["fallback"].value() > 0.5 {
        return Err(DfclError::SampleSkipped("surrogate mask collapsed".into()));
    }
    let regret = outs["regret"].value();
    let grads = pg.graph.backward(pg.loss, 1.0)?;
    Ok((pair.flat_gradient(&grads), regret))
}

/// Forecast MSE (both series) and its gradient for one sample.
fn sample_mse_grad(
    pair: &ModelPair,
    ctx: &TaskContext,
    sample: &SampleData,
    want_grad: bool,
) -> Result<(Vec<f64>, f64)> {
    let mut g = autodiff::Graph::new();
    let price_out = pair.price.wire(&mut g, "price", &sample.ctx_price, &ctx.vessel_mat)?;
    let load_out = pair.load.wire(&mut g, "load", &sample.ctx_load, &ctx.vessel_mat)?;
    let price_true = g.constant(Tensor::vector(sample.prices.clone()));
    let load_true = g.constant(Tensor::vector(sample.net_load.clone()));
    let dp = g.sub(price_out, price_true);
    let dp2 = g.mul(dp, dp);
    let mp = g.mean(dp2);
    let dl = g.sub(load_out, load_true);
    let dl2 = g.mul(dl, dl);
    let ml = g.mean(dl2);
    let loss = g.add(mp, ml);
    g.mark_output("loss", loss);
    g.forward(&BTreeMap::new())?;
    let val = g.output_value(loss).unwrap().value();
    if want_grad {
        let grads = g.backward(loss, 1.0)?;
        Ok((pair.flat_gradient(&grads), val))
    } else {
        Ok((Vec::new(), val))
    }
}

pub struct TrainOutcome {
    pub log: TrainLog,
    /// Wall time of the whole call, for the timing study.
    pub wall_ms: u128,
}

/// Trains `pair` in place. `samples` pair each day with its task context
/// (several contexts only for the joint-retraining baseline). For the
/// consolidation mode, `fisher` is read as the prior and updated at the end.
pub fn train_task(
    pair: &mut ModelPair,
    ctxs: &[TaskContext],
    samples: &[(usize, SampleData)],
    mode: TrainMode,
    hyper: &Hyper,
    fisher: &mut FisherState,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    if samples.is_empty() {
        return Err(DfclError::BadState("no training samples".into()));
    }
    if mode == TrainMode::DfclEwc && fisher.dim() != pair.n_params() {
        return Err(DfclError::BadState("fisher state dimension mismatch".into()));
    }
    let mut log = TrainLog::default();
    let mut rng = SplitMix64::new(hyper.seed);

    // Statistical phase: SBL entirely, a warm start for the rest.
    let mse_epochs = if mode == TrainMode::Sbl { hyper.epochs.max(hyper.pretrain_epochs) } else { hyper.pretrain_epochs };
    if mse_epochs > 0 {
        run_mse_phase(pair, ctxs, samples, mse_epochs, hyper, &mut rng, &mut log)?;
    }
    if mode == TrainMode::Sbl {
        return Ok(TrainOutcome { log, wall_ms: started.elapsed().as_millis() });
    }

    // Decision-focused phase.
    let dim = pair.n_params();
    let mut theta = pair.flatten();
    let mut opt = RmsOptimizer::new(dim, hyper.lr);
    let freeze_mask = (mode == TrainMode::DfclFreeze).then(|| pair.head_only_mask());
    let use_ewc = mode == TrainMode::DfclEwc && fisher.has_history();

    // Seeded day pool for the decision-focused phase.
    let mut pool: Vec<usize> = (0..samples.len()).collect();
    rng.shuffle(&mut pool);
    if hyper.dfl_pool > 0 && hyper.dfl_pool < pool.len() {
        pool.truncate(hyper.dfl_pool);
    }
    // Perfect-foresight training-pipeline costs for the pool, shared across
    // epochs.
    let pf_pool: Vec<Option<f64>> = par_map(&pool, |_, &si| {
        let (ci, s) = &samples[si];
        training_pf_cost(&ctxs[*ci], &s.prices, &s.net_load, &hyper.eps_ladder).ok()
    });
    let mut pf_costs: std::collections::BTreeMap<usize, Option<f64>> = std::collections::BTreeMap::new();
    for (slot, &si) in pool.iter().enumerate() {
        pf_costs.insert(si, pf_pool[slot]);
    }

    let mut order: Vec<usize> = pool.clone();
    rng.shuffle(&mut order);
    let mut cursor = 0usize;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0usize;

    for epoch in 0..hyper.epochs {
        let t0 = Instant::now();
        let n_take = hyper.samples_per_epoch.min(samples.len());
        let mut epoch_idx = Vec::with_capacity(n_take);
        for _ in 0..n_take {
            if cursor == order.len() {
                cursor = 0;
                rng.shuffle(&mut order);
            }
            epoch_idx.push(order[cursor]);
            cursor += 1;
        }

        let mut epoch_regret = 0.0;
        let mut counted = 0usize;
        for batch in epoch_idx.chunks(hyper.batch_size.max(1)) {
            let results: Vec<Result<(Vec<f64>, f64)>> = par_map(batch, |_, &si| {
                let (ci, sample) = &samples[si];
                let Some(pf) = pf_costs.get(&si).copied().flatten() else {
                    return Err(DfclError::SampleSkipped("no perfect-foresight baseline".into()));
                };
                sample_regret_grad(pair, &ctxs[*ci], sample, &hyper.eps_ladder, pf)
            });
            let mut grad = vec![0.0; dim];
            let mut used = 0usize;
            for r in results {
                match r {
                    Ok((g, regret)) => {
                        for (a, b) in grad.iter_mut().zip(&g) {
                            *a += b;
                        }
                        epoch_regret += regret;
                        counted += 1;
                        used += 1;
                    }
                    Err(DfclError::SampleSkipped(msg)) => {
                        log.skipped_samples += 1;
                        eprintln!("note: sample skipped during training: {msg}");
                    }
                    Err(e) => {
                        log.skipped_samples += 1;
                        eprintln!("note: sample skipped during training: {e}");
                    }
                }
            }
            if used == 0 {
                continue;
            }
            for gv in grad.iter_mut() {
                *gv /= used as f64;
            }
            if !grad.iter().all(|v| v.is_finite()) {
                return Err(DfclError::Diverged("non-finite gradient".into()));
            }
            if let Some(mask) = &freeze_mask {
                for (gv, &live) in grad.iter_mut().zip(mask) {
                    if !live {
                        *gv = 0.0;
                    }
                }
            }
            opt.step(&mut theta, &grad);
            if use_ewc {
                opt.apply_ewc_prox(&mut theta, fisher, hyper.ewc_scale);
            }
            pair.unflatten(&theta)?;
        }

        let mean_regret = if counted > 0 { epoch_regret / counted as f64 } else { f64::NAN };
        if !mean_regret.is_finite() {
            return Err(DfclError::Diverged(format!("epoch {epoch}: mean regret {mean_regret}")));
        }
        let mse_probe = probe_mse(pair, ctxs, samples, &epoch_idx)?;
        let penalty = if use_ewc { ewc_penalty(&theta, fisher, hyper.ewc_scale).0 } else { 0.0 };
        log.rows.push(TrainLogRow {
            epoch: mse_epochs + epoch,
            mean_regret,
            mse: mse_probe,
            penalty,
            wall_ms: t0.elapsed().as_millis(),
        });

        let objective = mean_regret + penalty;
        if best.as_ref().is_none_or(|(b, _)| objective < *b - 1e-9) {
            best = Some((objective, theta.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.early_stop_patience {
                break;
            }
        }
    }
    if let Some((_, best_theta)) = best {
        theta = best_theta;
        pair.unflatten(&theta)?;
    }

    // Consolidation bookkeeping at the task boundary.
    if mode == TrainMode::DfclEwc {
        let n_fisher = hyper.fisher_samples.min(pool.len());
        let fisher_idx: Vec<usize> = pool[..n_fisher].to_vec();
        let grads: Vec<Vec<f64>> = par_map(&fisher_idx, |_, &si| {
            let (ci, s) = &samples[si];
            let pf = pf_costs.get(&si).copied().flatten().unwrap_or(0.0);
            sample_regret_grad(pair, &ctxs[*ci], s, &hyper.eps_ladder, pf)
                .map(|(g, _)| g)
                .unwrap_or_else(|_| vec![0.0; dim])
        });
        let grads: Vec<Vec<f64>> = grads.into_iter().filter(|g| g.iter().any(|v| *v != 0.0)).collect();
        if !grads.is_empty() {
            let est = estimate_fisher(&grads, hyper.fisher_mode)?;
            fisher.accumulate(&est, samples.len() as f64, &theta)?;
        } else {
            // Keep the anchor moving even if every probe failed.
            let est = estimate_fisher(&[vec![0.0; dim]], hyper.fisher_mode)?;
            fisher.accumulate(&est, samples.len() as f64, &theta)?;
        }
    }

    Ok(TrainOutcome { log, wall_ms: started.elapsed().as_millis() })
}

fn run_mse_phase(
    pair: &mut ModelPair,
    ctxs: &[TaskContext],
    samples: &[(usize, SampleData)],
    epochs: usize,
    hyper: &Hyper,
    rng: &mut SplitMix64,
    log: &mut TrainLog,
) -> Result<()> {
    let dim = pair.n_params();
    let mut theta = pair.flatten();
    let mut opt = RmsOptimizer::new(dim, hyper.lr);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut stale = 0usize;
    for epoch in 0..epochs {
        let t0 = Instant::now();
        rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch_size.max(1)) {
            let results: Vec<Result<(Vec<f64>, f64)>> = par_map(batch, |_, &si| {
                let (ci, sample) = &samples[si];
                sample_mse_grad(pair, &ctxs[*ci], sample, true)
            });
            let mut grad = vec![0.0; dim];
            let mut used = 0usize;
            for r in results {
                let (g, v) = r?;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += b;
                }
                total += v;
                used += 1;
            }
            for gv in grad.iter_mut() {
                *gv /= used as f64;
            }
            opt.step(&mut theta, &grad);
            pair.unflatten(&theta)?;
        }
        let mean = total / samples.len() as f64;
        if !mean.is_finite() {
            return Err(DfclError::Diverged(format!("statistical epoch {epoch}: loss {mean}")));
        }
        log.rows.push(TrainLogRow {
            epoch,
            mean_regret: f64::NAN,
            mse: mean,
            penalty: 0.0,
            wall_ms: t0.elapsed().as_millis(),
        });
        if best.as_ref().is_none_or(|(b, _)| mean < *b - 1e-12) {
            best = Some((mean, theta.clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= hyper.early_stop_patience {
                break;
            }
        }
    }
    if let Some((_, best_theta)) = best {
        pair.unflatten(&best_theta)?;
    }
    Ok(())
}

fn probe_mse(
    pair: &ModelPair,
    ctxs: &[TaskContext],
    samples: &[(usize, SampleData)],
    idx: &[usize],
) -> Result<f64> {
    let take = idx.len().min(16);
    let mut total = 0.0;
    for &si in idx.iter().take(take) {
        let (ci, sample) = &samples[si];
        let (_, v) = sample_mse_grad(pair, &ctxs[*ci], sample, false)?;
        total += v;
    }
    Ok(total / take.max(1) as f64)
}
