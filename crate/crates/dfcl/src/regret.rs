//! Regret: realized settlement cost of forecast-driven decisions minus the
//! cost under perfect foresight. Training mode runs the differentiable
//! surrogate pipeline; evaluation mode re-solves the true discrete problem
//! with the heuristic scheduler. Perfect-foresight costs are pure functions
//! of (task, day) and are cached by the callers.

use port_model::{build_real_time, DayAheadFix, Task};
use scheduler::{solve_logistics, SearchConfig};

use crate::error::Result;
use crate::pipeline::{training_pipeline_cost, TaskContext};

/// Evaluation-mode pipeline cost: heuristic discrete day-ahead from the
/// forecasts, then the real-time LP against the realized series.
pub fn eval_pipeline_cost(
    task: &Task,
    price_forecast: &[f64],
    load_forecast: &[f64],
    actual_prices: &[f64],
    actual_load: &[f64],
    sched: &SearchConfig,
) -> Result<f64> {
    let day_ahead = solve_logistics(task, price_forecast, load_forecast, sched)?.solution;
    let fix = DayAheadFix {
        bid: day_ahead.bid.clone(),
        ess_ch: day_ahead.ess_charge.clone(),
        ess_dch: day_ahead.ess_discharge.clone(),
        qc_power: day_ahead.quay_crane_power.clone(),
        berthing: day_ahead.discrete.berthed.iter().map(|&b| f64::from(b)).collect(),
    };
    let rt = build_real_time(task, &fix, actual_prices, actual_load, &Default::default())?;
    let pt = qp_layer::solve_with(&rt.program, 0.0, &qp_layer::SolverOptions::robust())?;
    Ok(pt.objective)
}

/// Evaluation-mode regret for one day.
pub fn eval_regret(
    task: &Task,
    price_forecast: &[f64],
    load_forecast: &[f64],
    actual_prices: &[f64],
    actual_load: &[f64],
    sched: &SearchConfig,
    pf_cost: f64,
) -> Result<f64> {
    let cost =
        eval_pipeline_cost(task, price_forecast, load_forecast, actual_prices, actual_load, sched)?;
    Ok(cost - pf_cost)
}

/// Perfect-foresight cost for the evaluation pipeline (same scheduler seed
/// pairs the comparison).
pub fn eval_pf_cost(
    task: &Task,
    actual_prices: &[f64],
    actual_load: &[f64],
    sched: &SearchConfig,
) -> Result<f64> {
    eval_pipeline_cost(task, actual_prices, actual_load, actual_prices, actual_load, sched)
}

/// Training-mode regret for one day at given forecasts.
pub fn training_regret(
    ctx: &TaskContext,
    price_forecast: &[f64],
    load_forecast: &[f64],
    actual_prices: &[f64],
    actual_load: &[f64],
    epsilons: &[f64],
    pf_cost: f64,
) -> Result<f64> {
    let cost = training_pipeline_cost(
        ctx,
        price_forecast,
        load_forecast,
        actual_prices,
        actual_load,
        epsilons,
    )?;
    Ok(cost - pf_cost)
}

/// Training-mode perfect-foresight cost: the same surrogate pipeline driven
/// by the realized series.
pub fn training_pf_cost(
    ctx: &TaskContext,
    actual_prices: &[f64],
    actual_load: &[f64],
    epsilons: &[f64],
) -> Result<f64> {
    training_pipeline_cost(ctx, actual_prices, actual_load, actual_prices, actual_load, epsilons)
}
