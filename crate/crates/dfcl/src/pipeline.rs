//! End-to-end differentiable pipeline for one sample: forecasts feed the
//! memory surrogate, the surrogate's discrete surface fixes the convexified
//! day-ahead program, its plan flows into the real-time re-dispatch, and the
//! realized settlement cost closes the graph. Both optimization stages are
//! conic-QP custom nodes differentiated through their KKT systems.

use std::sync::Arc;

use autodiff::{Graph, NodeRef, Tensor};
use forecaster::ForecastModel;
use port_model::{
    build_day_ahead_convex, build_real_time, BuildOptions, ConicProgram, DayAheadFix,
    SurrogateFix, Task,
};
use qp_layer::{ConicQpOp, SolverOptions};

/// Solver profile for training solves: gradient targets are 1e-2 relative,
/// so a few orders of slack on the duality gap buys robustness on the
/// degenerate programs perturbed forecasts occasionally produce.
pub fn training_solver_options() -> SolverOptions {
    SolverOptions::robust()
}
use soft_knn::{MemorySet, SurrogateOp};

use crate::error::{DfclError, Result};

/// Everything constant about a task during training: the task itself, the
/// surrogate memory, precomputed vessel features and the pipeline nodes.
pub struct TaskContext {
    pub task: Task,
    pub memory: Arc<MemorySet>,
    pub memory_version: u64,
    pub vessel_mat: Vec<f64>,
    pub build_opts: BuildOptions,
    surrogate_op: Arc<SurrogateOp>,
}

impl TaskContext {
    pub fn new(task: Task, memory: Arc<MemorySet>, memory_version: u64) -> Self {
        let vessel_mat = forecaster::vessel_matrix(&task.vessels);
        let surrogate_op = Arc::new(SurrogateOp::new(Arc::clone(&memory)));
        TaskContext {
            task,
            memory,
            memory_version,
            vessel_mat,
            build_opts: BuildOptions::default(),
            surrogate_op,
        }
    }

    pub fn replace_memory(&mut self, memory: Arc<MemorySet>, version: u64) {
        self.surrogate_op = Arc::new(SurrogateOp::new(Arc::clone(&memory)));
        self.memory = memory;
        self.memory_version = version;
    }
}

/// One training day.
#[derive(Debug, Clone)]
pub struct SampleData {
    pub ctx_price: Vec<f64>,
    pub ctx_load: Vec<f64>,
    pub prices: Vec<f64>,
    pub net_load: Vec<f64>,
}

pub struct PipelineGraph {
    pub graph: Graph,
    pub loss: NodeRef,
    pub price_forecast: NodeRef,
    pub load_forecast: NodeRef,
    pub fallback_flag: NodeRef,
}

/// Builds the full training-mode graph. `pf_cost` (the perfect-foresight
/// baseline, constant in the parameters) is subtracted so the loss node is
/// the regret.
pub fn build_pipeline_graph(
    ctx: &TaskContext,
    price_model: &ForecastModel,
    load_model: &ForecastModel,
    sample: &SampleData,
    epsilons: &[f64],
    pf_cost: f64,
) -> Result<PipelineGraph> {
    let t_n = ctx.task.horizon();
    let mut g = Graph::new();
    let price_forecast = price_model.wire(&mut g, "price", &sample.ctx_price, &ctx.vessel_mat)?;
    let load_forecast = load_model.wire(&mut g, "load", &sample.ctx_load, &ctx.vessel_mat)?;

    // Surrogate query: [net load forecast, price forecast].
    let query = g.concat(&[load_forecast, price_forecast]);
    let sur = g.custom(ctx.surrogate_op.clone() as Arc<dyn autodiff::CustomOp>, &[query]);
    let (qc_hat, v_hat, fallback_flag) = (sur[0], sur[1], sur[2]);

    // Day-ahead node: eta = [prices, net_load, qc_power, berthing].
    let da_template = {
        let task = ctx.task.clone();
        let opts = ctx.build_opts.clone();
        move |inputs: &[&Tensor]| -> std::result::Result<ConicProgram, String> {
            let fix = SurrogateFix {
                qc_power: inputs[2].data().to_vec(),
                berthing: inputs[3].data().to_vec(),
            };
            build_day_ahead_convex(&task, inputs[0].data(), inputs[1].data(), &fix, &opts)
                .map(|da| da.program)
                .map_err(|e| e.to_string())
        }
    };
    // Variable spans are fixed per task; probe them from a dummy build.
    let probe = build_day_ahead_convex(
        &ctx.task,
        &vec![1.0; t_n],
        &vec![0.0; t_n],
        &SurrogateFix { qc_power: vec![0.0; t_n], berthing: vec![1.0; ctx.task.n_vessels() * t_n] },
        &ctx.build_opts,
    )?;
    let da_op = Arc::new(ConicQpOp::new(
        "day_ahead_qp",
        Arc::new(da_template),
        vec![
            (probe.vars.bid, t_n),
            (probe.vars.ess_ch, t_n),
            (probe.vars.ess_dch, t_n),
        ],
        epsilons.to_vec(),
        training_solver_options(),
    ));
    let da_out = g.custom(da_op as Arc<dyn autodiff::CustomOp>, &[
        price_forecast,
        load_forecast,
        qc_hat,
        v_hat,
    ]);
    let (bid, ess_ch, ess_dch) = (da_out[0], da_out[1], da_out[2]);

    // Real-time node under the realized series:
    // eta = [bid, ess_ch, ess_dch, qc_power, berthing].
    let rt_template = {
        let task = ctx.task.clone();
        let opts = ctx.build_opts.clone();
        let prices = sample.prices.clone();
        let net_load = sample.net_load.clone();
        move |inputs: &[&Tensor]| -> std::result::Result<ConicProgram, String> {
            let fix = DayAheadFix {
                bid: inputs[0].data().to_vec(),
                ess_ch: inputs[1].data().to_vec(),
                ess_dch: inputs[2].data().to_vec(),
                qc_power: inputs[3].data().to_vec(),
                berthing: inputs[4].data().to_vec(),
            };
            build_real_time(&task, &fix, &prices, &net_load, &opts)
                .map(|rt| rt.program)
                .map_err(|e| e.to_string())
        }
    };
    let rt_op = Arc::new(ConicQpOp::new(
        "real_time_lp",
        Arc::new(rt_template),
        vec![(t_n, t_n), (2 * t_n, t_n)], // deviation blocks
        epsilons.to_vec(),
        training_solver_options(),
    ));
    let rt_out = g.custom(rt_op as Arc<dyn autodiff::CustomOp>, &[
        bid, ess_ch, ess_dch, qc_hat, v_hat,
    ]);
    let (dev_pos, dev_neg) = (rt_out[0], rt_out[1]);

    // Settlement under actual prices, minus the perfect-foresight constant.
    let im = ctx.task.static_params.imbalance;
    let actual_prices = g.constant(Tensor::vector(sample.prices.clone()));
    let base_term = g.dot(actual_prices, bid);
    let up = g.dot(actual_prices, dev_pos);
    let down = g.dot(actual_prices, dev_neg);
    let loss = g.lincomb(
        &[(1.0, base_term), (im.rho_pos, up), (-im.rho_neg, down)],
        Some(Tensor::scalar(-pf_cost)),
    );
    g.mark_output("regret", loss);
    g.mark_output("price_forecast", price_forecast);
    g.mark_output("load_forecast", load_forecast);
    g.mark_output("fallback", fallback_flag);
    Ok(PipelineGraph { graph: g, loss, price_forecast, load_forecast, fallback_flag })
}

/// Solve with the Tikhonov escalation ladder: the first weight that
/// converges wins.
fn solve_ladder(prog: &port_model::ConicProgram, epsilons: &[f64]) -> Result<qp_layer::KktPoint> {
    let mut last: Option<qp_layer::QpError> = None;
    for &eps in epsilons {
        match qp_layer::solve_with(prog, eps, &training_solver_options()) {
            Ok(pt) => return Ok(pt),
            Err(e @ qp_layer::QpError::MaxIter { .. })
            | Err(e @ qp_layer::QpError::SingularKkt { .. }) => last = Some(e),
            Err(e) => return Err(e.into()),
        }
    }
    Err(last.expect("ladder tried at least one weight").into())
}

/// Training-mode pipeline cost (surrogate + convexified day-ahead +
/// real-time) for given forecasts, without building a graph.
pub fn training_pipeline_cost(
    ctx: &TaskContext,
    price_forecast: &[f64],
    load_forecast: &[f64],
    actual_prices: &[f64],
    actual_load: &[f64],
    epsilons: &[f64],
) -> Result<f64> {
    let mut query = Vec::with_capacity(2 * load_forecast.len());
    query.extend_from_slice(load_forecast);
    query.extend_from_slice(price_forecast);
    let sur = soft_knn::surrogate_forward(&ctx.memory, &query)?;
    if sur.fallback {
        return Err(DfclError::SampleSkipped("surrogate mask collapsed".into()));
    }
    let fix = SurrogateFix { qc_power: sur.qc.clone(), berthing: sur.berthing.clone() };
    let da = build_day_ahead_convex(ctx.task_ref(), price_forecast, load_forecast, &fix, &ctx.build_opts)?;
    let da_pt = solve_ladder(&da.program, epsilons)?;
    let t_n = ctx.task.horizon();
    let rt_fix = DayAheadFix {
        bid: da_pt.x[da.vars.bid..da.vars.bid + t_n].to_vec(),
        ess_ch: da_pt.x[da.vars.ess_ch..da.vars.ess_ch + t_n].to_vec(),
        ess_dch: da_pt.x[da.vars.ess_dch..da.vars.ess_dch + t_n].to_vec(),
        qc_power: sur.qc,
        berthing: sur.berthing,
    };
    let rt = build_real_time(ctx.task_ref(), &rt_fix, actual_prices, actual_load, &ctx.build_opts)?;
    let rt_pt = solve_ladder(&rt.program, epsilons)?;
    Ok(rt_pt.objective)
}

impl TaskContext {
    fn task_ref(&self) -> &Task {
        &self.task
    }
}
