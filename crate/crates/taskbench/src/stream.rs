//! Continual-learning benchmark runner: trains each configured mode
//! sequentially over the task stream, evaluates every checkpoint on the test
//! sets of all tasks seen so far (re-solving the true discrete problem with
//! a scheduler seed shared across modes so comparisons are paired), and
//! aggregates regret, regret ratio, forgetting, forecast errors and wall
//! time into a reproducible report.

use std::path::Path;
use std::sync::Arc;

use autodiff::rng::SplitMix64;
use dfcl::par::par_map;
use dfcl::{
    eval_pf_cost, eval_pipeline_cost, train_task, FisherMode, FisherState, ModelPair, SampleData,
    TaskContext, TrainMode,
};
use forecaster::{build_context, context_dim, mae, Normalization};
use port_model::{load_fixture_with_horizon, Task};
use scheduler::{build_memory_set, MemoryEntry, SearchConfig};
use serde::{Deserialize, Serialize};
use soft_knn::{MemorySet, Metric};

use crate::config::BenchConfig;
use crate::dataset::{generate_synthetic, from_csv, Dataset};
use crate::error::{BenchError, Result};
use crate::metrics::{metric_fm, metric_rr};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalRecord {
    pub mode: String,
    pub seed: u64,
    pub checkpoint: usize,
    pub task_index: usize,
    pub task_id: String,
    pub mae_load: f64,
    pub mae_price: f64,
    pub mean_regret: f64,
    pub mean_cost: f64,
    pub n_days: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointSummary {
    pub mode: String,
    pub seed: u64,
    pub checkpoint: usize,
    pub avg_mae_load: f64,
    pub avg_mae_price: f64,
    pub avg_regret: f64,
    pub rr_percent: f64,
    pub fm: f64,
    pub train_wall_ms: u128,
}

/// First-checkpoint model applied to every task (including unseen ones).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferRecord {
    pub mode: String,
    pub seed: u64,
    pub task_index: usize,
    pub mean_regret: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct StreamReport {
    pub records: Vec<EvalRecord>,
    pub summaries: Vec<CheckpointSummary>,
    pub transfers: Vec<TransferRecord>,
    pub aborted_modes: Vec<String>,
}

pub struct PreparedTask {
    pub task: Task,
    pub train_samples: Vec<SampleData>,
    pub test_samples: Vec<SampleData>,
    pub memory_entries: Vec<MemoryEntry>,
}

pub struct Bench {
    pub cfg: BenchConfig,
    pub dataset: Dataset,
    pub tasks: Vec<PreparedTask>,
    /// Cumulative surrogate memory after each task index.
    pub memories: Vec<Arc<MemorySet>>,
    /// Perfect-foresight evaluation costs per (task, eval day).
    pub pf_eval: Vec<Vec<f64>>,
    pub norm_price: Normalization,
    pub norm_load: Normalization,
}

fn sample_for_day(ds: &Dataset, day: usize, horizon: usize) -> SampleData {
    let start = ds.window_start(day);
    let dow = ds.day_of_week(day);
    let net = ds.net_load_series();
    SampleData {
        ctx_price: build_context(&ds.price, None, start, dow),
        ctx_load: build_context(&net, Some(&ds.irradiance), start, dow),
        prices: ds.price_window(day, horizon),
        net_load: ds.net_load_window(day, horizon),
    }
}

impl Bench {
    pub fn prepare(cfg: BenchConfig) -> Result<Bench> {
        let dataset = match &cfg.data_csv {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
                from_csv(&text, cfg.train_days, cfg.test_days)?
            }
            None => generate_synthetic(cfg.data_seed, cfg.train_days + cfg.test_days, cfg.train_days)?,
        };
        dataset.validate(cfg.horizon)?;

        let eval_days = if cfg.eval_days == 0 {
            cfg.test_days
        } else {
            cfg.eval_days.min(cfg.test_days)
        };
        let horizon = cfg.horizon;

        // Per-day samples, shared by every task (tasks differ only in
        // vessel configuration).
        let train_samples: Vec<SampleData> =
            (0..cfg.train_days).map(|d| sample_for_day(&dataset, d, horizon)).collect();
        let test_samples: Vec<SampleData> = (cfg.train_days..cfg.train_days + eval_days)
            .map(|d| sample_for_day(&dataset, d, horizon))
            .collect();

        // Normalization statistics from the training split.
        let ctxs_p: Vec<Vec<f64>> = train_samples.iter().map(|s| s.ctx_price.clone()).collect();
        let ctxs_l: Vec<Vec<f64>> = train_samples.iter().map(|s| s.ctx_load.clone()).collect();
        let tg_p: Vec<Vec<f64>> = train_samples.iter().map(|s| s.prices.clone()).collect();
        let tg_l: Vec<Vec<f64>> = train_samples.iter().map(|s| s.net_load.clone()).collect();
        let norm_price = Normalization::fit(&ctxs_p, &tg_p);
        let norm_load = Normalization::fit(&ctxs_l, &tg_l);

        // Memory construction per task: ground-truth days plus perturbed
        // variants, solved by the scheduler. Shared across modes and seeds
        // so method comparisons stay paired.
        let mut tasks = Vec::new();
        for (ti, &id) in cfg.tasks.iter().enumerate() {
            let task = load_fixture_with_horizon(id, horizon)?;
            let mut rng = SplitMix64::new(cfg.data_seed ^ (0xA11CE + ti as u64));
            let mut mem_samples: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
            let mut day_pick: Vec<usize> = (0..cfg.train_days).collect();
            rng.shuffle(&mut day_pick);
            for &d in day_pick.iter().take(cfg.memory_truth) {
                let s = &train_samples[d];
                mem_samples.push((s.net_load.clone(), s.prices.clone()));
            }
            let p_std = std_of(&dataset.price);
            let l_std = std_of(&dataset.net_load_series());
            for i in 0..cfg.memory_noisy {
                let base = &train_samples[day_pick[i % cfg.memory_truth.max(1)]];
                let load: Vec<f64> = base
                    .net_load
                    .iter()
                    .map(|v| v + cfg.memory_noise_frac * l_std * rng.normal())
                    .collect();
                let prices: Vec<f64> = base
                    .prices
                    .iter()
                    .map(|v| (v + cfg.memory_noise_frac * p_std * rng.normal()).max(0.5))
                    .collect();
                mem_samples.push((load, prices));
            }
            let sched = SearchConfig::with_seed(cfg.sched_seed ^ (ti as u64 + 1));
            let memory_entries = build_memory_set(&task, &mem_samples, &sched)?;
            tasks.push(PreparedTask {
                task,
                train_samples: train_samples.clone(),
                test_samples: test_samples.clone(),
                memory_entries,
            });
        }

        // Cumulative memories.
        let t_n = horizon;
        let mut memories = Vec::new();
        for k in 0..tasks.len() {
            let v_dim = tasks[k].task.n_vessels() * t_n;
            let mut mem = MemorySet::new(2 * t_n, t_n, v_dim, Metric::Cosine, 5);
            if cfg.memory_cap > 0 {
                mem.capacity = Some(cfg.memory_cap);
            }
            // Berthing label widths differ across tasks (vessel counts);
            // memory is kept per task with cumulative feature coverage:
            // entries from other tasks contribute their forecasts united
            // with this task's own labels only when shapes match.
            for older in tasks.iter().take(k + 1) {
                for e in &older.memory_entries {
                    if e.label_berthing.len() == v_dim {
                        mem.push(&e.features, &e.label_qc, &e.label_berthing)?;
                    }
                }
            }
            mem.refresh_stats();
            memories.push(Arc::new(mem));
        }

        // Perfect-foresight evaluation costs per (task, eval day), shared by
        // all modes and seeds.
        let sched = SearchConfig::fast(cfg.sched_seed);
        let mut pf_eval = Vec::new();
        for pt in &tasks {
            let costs: Vec<Result<f64>> = par_map(&pt.test_samples, |_, s| {
                eval_pf_cost(&pt.task, &s.prices, &s.net_load, &sched).map_err(BenchError::from)
            });
            let mut row = Vec::with_capacity(costs.len());
            for c in costs {
                row.push(c?);
            }
            pf_eval.push(row);
        }

        Ok(Bench { cfg, dataset, tasks, memories, pf_eval, norm_price, norm_load })
    }

    fn fresh_pair(&self, seed: u64) -> ModelPair {
        let horizon = self.cfg.horizon;
        let mut pair = ModelPair::init(
            horizon,
            context_dim(false),
            context_dim(true),
            seed,
        );
        pair.price.norm = self.norm_price.clone();
        pair.load.norm = self.norm_load.clone();
        pair
    }

    fn task_context(&self, k: usize) -> TaskContext {
        TaskContext::new(self.tasks[k].task.clone(), Arc::clone(&self.memories[k]), k as u64 + 1)
    }

    /// Evaluates a model pair on one task's test days.
    pub fn evaluate(&self, pair: &ModelPair, task_index: usize) -> Result<EvalOutcome> {
        let pt = &self.tasks[task_index];
        let vessel_mat = forecaster::vessel_matrix(&pt.task.vessels);
        let sched = SearchConfig::fast(self.cfg.sched_seed);
        let forecasts: Vec<(Vec<f64>, Vec<f64>)> = pt
            .test_samples
            .iter()
            .map(|s| {
                let fp = pair.price.predict(&s.ctx_price, &vessel_mat)?;
                let fl = pair.load.predict(&s.ctx_load, &vessel_mat)?;
                Ok::<_, BenchError>((fp, fl))
            })
            .collect::<Result<Vec<_>>>()?;
        evaluate_forecasts(&pt.task, &pt.test_samples, &forecasts, &self.pf_eval[task_index], &sched)
    }
}

pub struct EvalOutcome {
    pub mean_regret: f64,
    pub mean_cost: f64,
    pub mae_price: f64,
    pub mae_load: f64,
    pub n_days: usize,
    pub forecasts: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Reported regrets are recomputed from forecasts through the evaluation
/// pipeline; nothing cached during training is trusted.
pub fn evaluate_forecasts(
    task: &Task,
    samples: &[SampleData],
    forecasts: &[(Vec<f64>, Vec<f64>)],
    pf_costs: &[f64],
    sched: &SearchConfig,
) -> Result<EvalOutcome> {
    if forecasts.len() != samples.len() || pf_costs.len() != samples.len() {
        return Err(BenchError::Data("evaluation input length mismatch".into()));
    }
    let idx: Vec<usize> = (0..samples.len()).collect();
    let costs: Vec<Result<f64>> = par_map(&idx, |_, &i| {
        let s = &samples[i];
        let (fp, fl) = &forecasts[i];
        // Evaluation forecasts are clipped to the scheduler's price domain.
        let fp_pos: Vec<f64> = fp.iter().map(|v| v.max(0.0)).collect();
        eval_pipeline_cost(task, &fp_pos, fl, &s.prices, &s.net_load, sched).map_err(BenchError::from)
    });
    let mut total_regret = 0.0;
    let mut total_cost = 0.0;
    let mut mae_p = 0.0;
    let mut mae_l = 0.0;
    let n = samples.len();
    for (i, c) in costs.into_iter().enumerate() {
        let cost = c?;
        total_cost += cost;
        total_regret += cost - pf_costs[i];
        mae_p += mae(&forecasts[i].0, &samples[i].prices);
        mae_l += mae(&forecasts[i].1, &samples[i].net_load);
    }
    Ok(EvalOutcome {
        mean_regret: total_regret / n as f64,
        mean_cost: total_cost / n as f64,
        mae_price: mae_p / n as f64,
        mae_load: mae_l / n as f64,
        n_days: n,
        forecasts: forecasts.to_vec(),
    })
}

pub fn run_stream(cfg: BenchConfig, out_dir: Option<&Path>) -> Result<StreamReport> {
    let bench = Bench::prepare(cfg)?;
    run_stream_prepared(&bench, out_dir)
}

pub fn run_stream_prepared(bench: &Bench, out_dir: Option<&Path>) -> Result<StreamReport> {
    let cfg = &bench.cfg;
    let n_tasks = bench.tasks.len();
    let mut report = StreamReport::default();

    for &seed in &cfg.seeds {
        for &mode in &cfg.modes {
            let cell = run_cell(bench, mode, seed, out_dir);
            match cell {
                Ok(mut c) => {
                    report.records.append(&mut c.records);
                    report.summaries.append(&mut c.summaries);
                    report.transfers.append(&mut c.transfers);
                }
                Err(e) => {
                    eprintln!("mode {} seed {seed} aborted: {e}", mode.name());
                    report.aborted_modes.push(format!("{}/{seed}: {e}", mode.name()));
                }
            }
        }
    }
    let _ = n_tasks;
    if let Some(dir) = out_dir {
        crate::report::write_report(dir, &report)?;
    }
    Ok(report)
}

fn run_cell(
    bench: &Bench,
    mode: TrainMode,
    seed: u64,
    out_dir: Option<&Path>,
) -> Result<StreamReport> {
    let cfg = &bench.cfg;
    let n_tasks = bench.tasks.len();
    let mut report = StreamReport::default();
    let mut hyper = cfg.hyper.clone();
    hyper.seed = seed;

    // Sequential state.
    let mut pair: Option<ModelPair> = None;
    let mut fisher: Option<FisherState> = None;
    let mut taskwise_models: Vec<ModelPair> = Vec::new();
    // regret history: history[k][j] = mean regret on task j after checkpoint k
    let mut history: Vec<Vec<f64>> = Vec::new();

    for k in 0..n_tasks {
        let ctx = bench.task_context(k);
        let train_data: Vec<(usize, SampleData)> =
            bench.tasks[k].train_samples.iter().map(|s| (0usize, s.clone())).collect();

        let started = std::time::Instant::now();
        #[allow(unused_assignments)]
        let mut log_csv = String::new();
        let mut fisher_json: Option<String> = None;
        let trained_pair: &ModelPair = match mode {
            TrainMode::Sbl | TrainMode::DflTaskwise => {
                let mut fresh = bench.fresh_pair(seed);
                let mut fstate = FisherState::empty(fresh.n_params(), FisherMode::Diagonal)?;
                let ctxs = vec![ctx];
                let out =
                    train_task(&mut fresh, &ctxs, &train_data, mode_for(mode, k), &hyper, &mut fstate)?;
                log_csv = out.log.to_csv();
                taskwise_models.push(fresh);
                taskwise_models.last().unwrap()
            }
            TrainMode::Joint => {
                let mut fresh = bench.fresh_pair(seed);
                let mut fstate = FisherState::empty(fresh.n_params(), FisherMode::Diagonal)?;
                let ctxs: Vec<TaskContext> = (0..=k).map(|i| bench.task_context(i)).collect();
                let union: Vec<(usize, SampleData)> = (0..=k)
                    .flat_map(|i| {
                        bench.tasks[i].train_samples.iter().map(move |s| (i, s.clone()))
                    })
                    .collect();
                let out = train_task(&mut fresh, &ctxs, &union, TrainMode::Joint, &hyper, &mut fstate)?;
                log_csv = out.log.to_csv();
                taskwise_models.push(fresh);
                taskwise_models.last().unwrap()
            }
            TrainMode::DflSequential | TrainMode::DfclFreeze | TrainMode::DfclEwc => {
                let mut current = match pair.take() {
                    Some(p) => p,
                    None => bench.fresh_pair(seed),
                };
                let mut fstate = match fisher.take() {
                    Some(f) => f,
                    None => FisherState::empty(current.n_params(), FisherMode::Diagonal)?,
                };
                let mut h = hyper.clone();
                if k > 0 {
                    h.pretrain_epochs = 0; // warm start only for the first task
                }
                let ctxs = vec![ctx];
                let out =
                    train_task(&mut current, &ctxs, &train_data, mode_for(mode, k), &h, &mut fstate)?;
                log_csv = out.log.to_csv();
                if mode == TrainMode::DfclEwc {
                    fisher_json = Some(
                        serde_json::to_string(&fstate)
                            .map_err(|e| BenchError::Io(format!("fisher serialization: {e}")))?,
                    );
                }
                pair = Some(current);
                fisher = Some(fstate);
                pair.as_ref().unwrap()
            }
        };
        let train_wall_ms = started.elapsed().as_millis();
        if let Some(dir) = out_dir {
            crate::report::write_train_artifacts(
                dir,
                mode.name(),
                seed,
                k,
                &log_csv,
                fisher_json.as_deref(),
            )?;
        }

        // Evaluate on every task seen so far (task-wise modes evaluate task
        // j with its own model).
        let mut row = Vec::with_capacity(k + 1);
        let mut maes_l = 0.0;
        let mut maes_p = 0.0;
        let mut cum_regret = 0.0;
        let mut cum_cost = 0.0;
        for j in 0..=k {
            let eval_pair: &ModelPair = match mode {
                TrainMode::Sbl | TrainMode::DflTaskwise | TrainMode::Joint => {
                    if matches!(mode, TrainMode::Joint) {
                        trained_pair
                    } else {
                        &taskwise_models[j]
                    }
                }
                _ => trained_pair,
            };
            let out = bench.evaluate(eval_pair, j)?;
            row.push(out.mean_regret);
            maes_l += out.mae_load;
            maes_p += out.mae_price;
            cum_regret += out.mean_regret;
            cum_cost += out.mean_cost;
            report.records.push(EvalRecord {
                mode: mode.name().into(),
                seed,
                checkpoint: k,
                task_index: j,
                task_id: bench.tasks[j].task.id.clone(),
                mae_load: out.mae_load,
                mae_price: out.mae_price,
                mean_regret: out.mean_regret,
                mean_cost: out.mean_cost,
                n_days: out.n_days,
            });
            if let Some(dir) = out_dir {
                crate::report::write_forecasts(dir, mode.name(), seed, k, j, &out.forecasts)?;
            }
        }
        history.push(row);
        let fm = if k == 0 { 0.0 } else { fm_for_mode(mode, &history)? };
        let rr = metric_rr(cum_regret, cum_cost)?;
        report.summaries.push(CheckpointSummary {
            mode: mode.name().into(),
            seed,
            checkpoint: k,
            avg_mae_load: maes_l / (k + 1) as f64,
            avg_mae_price: maes_p / (k + 1) as f64,
            avg_regret: cum_regret / (k + 1) as f64,
            rr_percent: rr,
            fm,
            train_wall_ms,
        });

        // Transfer pass: the first checkpoint's model on every later task.
        if cfg.transfer_eval && k == 0 && mode.is_decision_focused() {
            for j in 0..n_tasks {
                let out = bench.evaluate(trained_pair, j)?;
                report.transfers.push(TransferRecord {
                    mode: mode.name().into(),
                    seed,
                    task_index: j,
                    mean_regret: out.mean_regret,
                });
            }
        }

        if let Some(dir) = out_dir {
            crate::report::write_checkpoint(dir, mode.name(), seed, k, trained_pair)?;
        }
    }
    Ok(report)
}

/// The freeze baseline trains fully on its first task (there is nothing to
/// preserve yet); every later task is head-only.
fn mode_for(mode: TrainMode, k: usize) -> TrainMode {
    match (mode, k) {
        (TrainMode::DfclFreeze, 0) => TrainMode::DflSequential,
        (m, _) => m,
    }
}

/// Task-wise modes keep a frozen model per task, so their forgetting is
/// structurally zero.
fn fm_for_mode(mode: TrainMode, history: &[Vec<f64>]) -> Result<f64> {
    match mode {
        TrainMode::Sbl | TrainMode::DflTaskwise => Ok(0.0),
        _ => metric_fm(history),
    }
}

fn std_of(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}
