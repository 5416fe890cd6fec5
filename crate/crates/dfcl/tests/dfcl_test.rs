use std::collections::BTreeMap;
use std::sync::Arc;

use autodiff::rng::SplitMix64;
use dfcl::{
    build_pipeline_graph, estimate_fisher, ewc_penalty, eval_pf_cost, eval_regret, train_task,
    training_pf_cost, training_regret, FisherMode, FisherState, Hyper, ModelPair, SampleData,
    TaskContext, TrainMode,
};
use forecaster::ForecastModel;
use port_model::{EssParams, ImbalancePrices, StaticParams, Task, VesselSpec};
use scheduler::{build_memory_set, SearchConfig};
use soft_knn::{MemorySet, Metric};

const T: usize = 8;
const CTX: usize = 6;

fn toy_task() -> Task {
    let sp = StaticParams {
        horizon: T,
        n_cranes: 3,
        crane_rated_power: 0.32,
        crane_efficiency: 70.0,
        berth_length: 10.0,
        ess: EssParams { p_max: 1.0, e_min: 0.0, e_max: 3.0, e_init: 1.5, eta_ch: 0.9, eta_dch: 0.9 },
        imbalance: ImbalancePrices { rho_pos: 1.8, rho_neg: 0.5 },
    };
    let vessel = VesselSpec {
        arrival_time: 1,
        max_leave_time: 6,
        cargo_volume: 280.0,
        min_qc: 1,
        max_qc: 2,
        base_power: 1.5,
        charge_demand: 2.0,
        charge_max: 1.0,
        length: 5.0,
        max_wait: 3,
    };
    Task::new("toy", sp, vec![vessel], "test").unwrap()
}

fn day(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let prices: Vec<f64> = (0..T).map(|t| 4.0 + 3.0 * ((t as f64) * 0.8).sin().abs() + rng.next_f64()).collect();
    let load: Vec<f64> = (0..T).map(|t| 1.0 + 0.5 * ((t as f64) * 0.5).cos() + 0.3 * rng.next_f64()).collect();
    (prices, load)
}

fn toy_context() -> TaskContext {
    let task = toy_task();
    let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..6)
        .map(|i| {
            let (prices, load) = day(100 + i);
            (load, prices)
        })
        .collect();
    let entries = build_memory_set(&task, &samples, &SearchConfig::with_seed(7)).unwrap();
    assert!(entries.len() >= 4, "memory construction lost samples");
    let mut mem = MemorySet::new(2 * T, T, task.n_vessels() * T, Metric::Cosine, 3);
    for e in &entries {
        mem.push(&e.features, &e.label_qc, &e.label_berthing).unwrap();
    }
    mem.refresh_stats();
    TaskContext::new(task, Arc::new(mem), 1)
}

fn toy_sample(seed: u64, ctx: &TaskContext) -> SampleData {
    let _ = ctx;
    let (prices, load) = day(seed);
    let mut rng = SplitMix64::new(seed ^ 0xfeed);
    SampleData {
        ctx_price: (0..CTX).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        ctx_load: (0..CTX).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        prices,
        net_load: load,
    }
}

#[test]
fn perfect_forecast_has_zero_regret_in_training_mode() {
    let ctx = toy_context();
    let (prices, load) = day(555);
    let pf = training_pf_cost(&ctx, &prices, &load, &[1e-6, 1e-4]).unwrap();
    let r = training_regret(&ctx, &prices, &load, &prices, &load, &[1e-6, 1e-4], pf).unwrap();
    assert!(r.abs() <= 1e-6 * (1.0 + pf.abs()), "regret {r} at pf {pf}");
}

#[test]
fn perfect_forecast_has_zero_regret_in_eval_mode() {
    let task = toy_task();
    let (prices, load) = day(777);
    let sched = SearchConfig::with_seed(3);
    let pf = eval_pf_cost(&task, &prices, &load, &sched).unwrap();
    let r = eval_regret(&task, &prices, &load, &prices, &load, &sched, pf).unwrap();
    assert_eq!(r, 0.0, "identical pipelines must cancel exactly");
}

#[test]
fn eval_regret_matches_oracle_pipeline_difference() {
    // Shift the price forecast and compare against an independently
    // assembled pipeline difference using the exact tiny-instance oracle.
    let task = toy_task();
    let (prices, load) = day(888);
    let mut shifted = prices.clone();
    for (t, v) in shifted.iter_mut().enumerate() {
        *v += if t % 2 == 0 { 1.2 } else { -0.7 };
        *v = v.max(0.1);
    }
    let sched = SearchConfig::with_seed(9);
    let pf = eval_pf_cost(&task, &prices, &load, &sched).unwrap();
    let r = eval_regret(&task, &shifted, &load, &prices, &load, &sched, pf).unwrap();

    // Oracle route: brute-force day-ahead at the shifted forecast, real-time
    // LP against truth, same for the perfect-foresight term.
    let oracle_cost = |fc_p: &[f64], fc_l: &[f64]| -> f64 {
        let da = scheduler::brute_force_tiny(&task, fc_p, fc_l).unwrap();
        let fix = port_model::DayAheadFix {
            bid: da.bid.clone(),
            ess_ch: da.ess_charge.clone(),
            ess_dch: da.ess_discharge.clone(),
            qc_power: da.quay_crane_power.clone(),
            berthing: da.discrete.berthed.iter().map(|&b| f64::from(b)).collect(),
        };
        let rt = port_model::build_real_time(&task, &fix, &prices, &load, &Default::default()).unwrap();
        qp_layer::solve(&rt.program, 0.0).unwrap().objective
    };
    let oracle_regret = oracle_cost(&shifted, &load) - oracle_cost(&prices, &load);
    assert!(
        (r - oracle_regret).abs() <= 1e-6 * (1.0 + oracle_regret.abs()),
        "regret {r} vs oracle {oracle_regret}"
    );
}

#[test]
fn pipeline_gradient_matches_finite_differences() {
    let ctx = toy_context();
    let mut pair = ModelPair {
        price: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 5),
        load: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 6),
    };
    let sample = toy_sample(1234, &ctx);
    let pf = training_pf_cost(&ctx, &sample.prices, &sample.net_load, &[1e-6, 1e-4]).unwrap();

    let mut pg = build_pipeline_graph(&ctx, &pair.price, &pair.load, &sample, &[1e-6], pf).unwrap();
    let outs = pg.graph.forward(&BTreeMap::new()).unwrap();
    assert!(outs["fallback"].value() < 0.5);
    let grads = pg.graph.backward(pg.loss, 1.0).unwrap();
    let flat = pair.flat_gradient(&grads);

    // Probe a spread of parameters with central differences through the
    // full (non-graph) pipeline path.
    let theta0 = pair.flatten();
    let eval_at = |theta: &[f64], pair: &mut ModelPair| -> f64 {
        pair.unflatten(theta).unwrap();
        let fc_p = pair.price.predict(&sample.ctx_price, &ctx.vessel_mat).unwrap();
        let fc_l = pair.load.predict(&sample.ctx_load, &ctx.vessel_mat).unwrap();
        training_regret(&ctx, &fc_p, &fc_l, &sample.prices, &sample.net_load, &[1e-6, 1e-4], pf).unwrap()
    };
    // Norm-wise comparison over a random parameter subset: per-coordinate
    // division would amplify solver noise (~tol/h) on near-zero entries.
    let mut rng = SplitMix64::new(777);
    let mut ad_sel = Vec::new();
    let mut fd_sel = Vec::new();
    for _ in 0..10 {
        let i = rng.below(theta0.len());
        let h = 1e-4;
        let mut up = theta0.clone();
        up[i] += h;
        let mut dn = theta0.clone();
        dn[i] -= h;
        let fd = (eval_at(&up, &mut pair) - eval_at(&dn, &mut pair)) / (2.0 * h);
        ad_sel.push(flat[i]);
        fd_sel.push(fd);
    }
    pair.unflatten(&theta0).unwrap();
    let err = autodiff::fd::rel_error(&ad_sel, &fd_sel, 1e-3);
    assert!(err <= 1e-2, "rel err {err}\nad {ad_sel:?}\nfd {fd_sel:?}");
}

#[test]
fn gradient_at_perfect_forecast_is_small_when_surrogate_saturates() {
    // The envelope argument makes the pipeline stationary at truth in the
    // directions where the decision set is fixed; the surrogate channel
    // vanishes too once its mask is saturated onto the truth's own memory
    // entry, so the total forecast-space gradient collapses.
    let task = toy_task();
    let days: Vec<(Vec<f64>, Vec<f64>)> = (0..6).map(|i| day(9000 + 37 * i)).collect();
    let samples: Vec<(Vec<f64>, Vec<f64>)> =
        days.iter().map(|(p, l)| (l.clone(), p.clone())).collect();
    let entries = build_memory_set(&task, &samples, &SearchConfig::with_seed(7)).unwrap();
    let mut mem =
        MemorySet::new(2 * T, T, task.n_vessels() * T, Metric::Euclidean, 1);
    for e in &entries {
        mem.push(&e.features, &e.label_qc, &e.label_berthing).unwrap();
    }
    mem.refresh_stats();
    let ctx = TaskContext::new(task, Arc::new(mem), 1);

    let (prices, load) = days[2].clone();
    let pf = training_pf_cost(&ctx, &prices, &load, &[1e-6, 1e-4]).unwrap();

    // Price directions are smooth at truth (the re-dispatch tracks the bid,
    // so no deviation kink engages) and the envelope argument applies; the
    // load directions sit exactly on the asymmetric settlement kink
    // ((rho+ - rho-)/2 * pi average slope) and cannot be stationary.
    let h = 1e-4;
    let mut price_grad: f64 = 0.0;
    for t in [0usize, 2, 4, 6] {
        let mut up = prices.clone();
        up[t] += h;
        let mut dn = prices.clone();
        dn[t] -= h;
        let rp = training_regret(&ctx, &up, &load, &prices, &load, &[1e-6, 1e-4], pf).unwrap();
        let rm = training_regret(&ctx, &dn, &load, &prices, &load, &[1e-6, 1e-4], pf).unwrap();
        price_grad = price_grad.max(((rp - rm) / (2.0 * h)).abs());
    }
    assert!(
        price_grad <= 1e-3 * (1.0 + pf.abs()),
        "price-direction gradient at truth: {price_grad} (pf {pf})"
    );

    // And regret itself vanishes at truth.
    let r0 = training_regret(&ctx, &prices, &load, &prices, &load, &[1e-6, 1e-4], pf).unwrap();
    assert!(r0.abs() <= 1e-9);
}

#[test]
fn fisher_single_sample_diag_is_squared_gradient() {
    let g = vec![0.5, -2.0, 0.0, 1.5];
    let est = estimate_fisher(&[g.clone()], FisherMode::Diagonal).unwrap();
    for (f, gv) in est.diag.iter().zip(&g) {
        assert_eq!(*f, gv * gv);
    }
}

#[test]
fn fisher_sign_symmetric_samples() {
    let g = vec![1.0, -0.5, 2.0];
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    let est = estimate_fisher(&[g.clone(), neg], FisherMode::Full).unwrap();
    let d = g.len();
    for i in 0..d {
        for j in 0..d {
            assert!((est.full.as_ref().unwrap()[i * d + j] - g[i] * g[j]).abs() < 1e-12);
        }
        assert!((est.diag[i] - g[i] * g[i]).abs() < 1e-12);
    }
}

#[test]
fn fisher_full_trace_equals_diag_sum() {
    let mut rng = SplitMix64::new(8);
    let grads: Vec<Vec<f64>> = (0..5).map(|_| (0..6).map(|_| rng.normal()).collect()).collect();
    let est = estimate_fisher(&grads, FisherMode::Full).unwrap();
    let trace: f64 = (0..6).map(|i| est.full.as_ref().unwrap()[i * 6 + i]).sum();
    let dsum: f64 = est.diag.iter().sum();
    assert!((trace - dsum).abs() < 1e-12);
}

#[test]
fn penalty_is_zero_at_anchor_and_quadratic_away() {
    let mut state = FisherState::empty(2, FisherMode::Diagonal).unwrap();
    state.prior_ridge = 0.0;
    state.anchor = vec![0.3, -0.7];
    state.diag = vec![1.0, 1.0];
    let (v0, g0) = ewc_penalty(&state.anchor, &state, 1.0);
    assert_eq!(v0, 0.0);
    assert!(g0.iter().all(|g| *g == 0.0));
    let theta = vec![1.3, 0.3];
    let (v, g) = ewc_penalty(&theta, &state, 1.0);
    assert!((v - 1.0).abs() < 1e-12);
    assert_eq!(g, vec![1.0, 1.0]);
    // Analytic gradient vs finite differences, exact for a quadratic.
    let fd = autodiff::fd::central_gradient(
        &mut |t: &[f64]| ewc_penalty(t, &state, 1.0).0,
        &theta,
        1e-5,
    );
    for (a, b) in g.iter().zip(&fd) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn beta_scales_task_contribution_linearly() {
    let mk = |beta: f64| {
        let mut st = FisherState::empty(2, FisherMode::Diagonal).unwrap();
        st.prior_ridge = 0.0;
        let est = estimate_fisher(&[vec![1.0, 2.0]], FisherMode::Diagonal).unwrap();
        st.accumulate(&est, beta, &[0.0, 0.0]).unwrap();
        st
    };
    let (p1, _) = ewc_penalty(&[1.0, 1.0], &mk(1.0), 1.0);
    let (p2, _) = ewc_penalty(&[1.0, 1.0], &mk(2.0), 1.0);
    assert!((p2 - 2.0 * p1).abs() < 1e-12);
}

#[test]
fn fisher_accumulation_is_order_invariant() {
    let ga = vec![vec![1.0, 0.5, -0.2]];
    let gb = vec![vec![-0.3, 2.0, 0.1]];
    let anchor = vec![0.1, 0.2, 0.3];
    let build = |first: &[Vec<f64>], second: &[Vec<f64>]| {
        let mut st = FisherState::empty(3, FisherMode::Diagonal).unwrap();
        let ea = estimate_fisher(first, FisherMode::Diagonal).unwrap();
        st.accumulate(&ea, 4.0, &anchor).unwrap();
        let eb = estimate_fisher(second, FisherMode::Diagonal).unwrap();
        st.accumulate(&eb, 2.0, &anchor).unwrap();
        st.diag
    };
    let ab = build(&ga, &gb);
    let ba = build(&gb, &ga);
    // Swap the betas with the tasks for the reversed order.
    let build_swapped = |first: &[Vec<f64>], second: &[Vec<f64>]| {
        let mut st = FisherState::empty(3, FisherMode::Diagonal).unwrap();
        let ea = estimate_fisher(first, FisherMode::Diagonal).unwrap();
        st.accumulate(&ea, 2.0, &anchor).unwrap();
        let eb = estimate_fisher(second, FisherMode::Diagonal).unwrap();
        st.accumulate(&eb, 4.0, &anchor).unwrap();
        st.diag
    };
    let ba_swapped = build_swapped(&gb, &ga);
    for i in 0..3 {
        assert!((ab[i] - ba_swapped[i]).abs() < 1e-15);
    }
    let _ = ba;
}

#[test]
fn sbl_training_reduces_mse() {
    let ctx = toy_context();
    let mut pair = ModelPair {
        price: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 2),
        load: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 3),
    };
    let samples: Vec<(usize, SampleData)> =
        (0..10).map(|i| (0usize, toy_sample(2000 + i as u64, &ctx))).collect();
    let hyper = Hyper { pretrain_epochs: 12, epochs: 12, early_stop_patience: 30, ..Default::default() };
    let mut fisher = FisherState::empty(pair.n_params(), FisherMode::Diagonal).unwrap();
    let ctxs = vec![ctx];
    let out = train_task(&mut pair, &ctxs, &samples, TrainMode::Sbl, &hyper, &mut fisher).unwrap();
    let first = out.log.rows.first().unwrap().mse;
    let last = out.log.rows.last().unwrap().mse;
    assert!(last < first, "mse {first} -> {last}");
    // Strictly decreasing over the first stretch of epochs.
    for w in out.log.rows.windows(2).take(9) {
        assert!(w[1].mse <= w[0].mse + 1e-9, "{} -> {}", w[0].mse, w[1].mse);
    }
}

#[test]
fn freeze_mode_only_moves_head_parameters() {
    let ctx = toy_context();
    let mut pair = ModelPair {
        price: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 4),
        load: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 5),
    };
    let before = pair.flatten();
    let mask = pair.head_only_mask();
    let samples: Vec<(usize, SampleData)> =
        (0..4).map(|i| (0usize, toy_sample(3000 + i as u64, &ctx))).collect();
    let hyper = Hyper {
        pretrain_epochs: 0,
        epochs: 2,
        samples_per_epoch: 4,
        batch_size: 2,
        ..Default::default()
    };
    let mut fisher = FisherState::empty(pair.n_params(), FisherMode::Diagonal).unwrap();
    let ctxs = vec![ctx];
    train_task(&mut pair, &ctxs, &samples, TrainMode::DfclFreeze, &hyper, &mut fisher).unwrap();
    let after = pair.flatten();
    let mut frozen_moved = 0;
    let mut live_moved = 0;
    for i in 0..before.len() {
        if before[i] != after[i] {
            if mask[i] {
                live_moved += 1;
            } else {
                frozen_moved += 1;
            }
        }
    }
    assert_eq!(frozen_moved, 0, "frozen parameters moved");
    assert!(live_moved > 0, "head parameters never moved");
}

#[test]
fn training_log_is_deterministic_per_seed() {
    let run = || {
        let ctx = toy_context();
        let mut pair = ModelPair {
            price: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 8),
            load: ForecastModel::init(forecaster::ModelConfig::tiny(T, CTX), 9),
        };
        let samples: Vec<(usize, SampleData)> =
            (0..6).map(|i| (0usize, toy_sample(4000 + i as u64, &ctx))).collect();
        let hyper = Hyper {
            pretrain_epochs: 2,
            epochs: 3,
            samples_per_epoch: 6,
            batch_size: 3,
            seed: 42,
            ..Default::default()
        };
        let mut fisher = FisherState::empty(pair.n_params(), FisherMode::Diagonal).unwrap();
        let ctxs = vec![ctx];
        let out =
            train_task(&mut pair, &ctxs, &samples, TrainMode::DflTaskwise, &hyper, &mut fisher)
                .unwrap();
        let numbers: Vec<(u64, u64, u64)> = out
            .log
            .rows
            .iter()
            .map(|r| (r.mean_regret.to_bits(), r.mse.to_bits(), r.penalty.to_bits()))
            .collect();
        (numbers, pair.flatten())
    };
    let (log_a, theta_a) = run();
    let (log_b, theta_b) = run();
    assert_eq!(log_a, log_b);
    assert_eq!(theta_a, theta_b);
}
