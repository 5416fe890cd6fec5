mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use autodiff::fd::rel_error;
use autodiff::rng::SplitMix64;
use autodiff::{Graph, Tensor};
use port_model::{
    build_day_ahead_convex, build_real_time, BuildOptions, Cone, ConicProgram, DayAheadFix,
    ParamMaps, SparseMat, StaticParams, SurrogateFix, Task, VesselSpec,
};
use qp_layer::testgen::{random_parameterized_lp, strict_complementarity_margin};
use qp_layer::{differentiate, solve, ConicQpOp, QpError, SolveStatus, SolverOptions};

/// Program with one free variable in a box: eta = [q-coeff, lower-bound].
fn scalar_program(c: f64, lower: f64, upper: f64, eps: f64) -> ConicProgram {
    let mut a = SparseMat::builder(1);
    let mut maps = ParamMaps::default();
    maps.q.push((0, 0, 1.0));
    let r0 = a.push_row(&[(0, -1.0)]); // x >= lower  ->  -x + s = -lower
    maps.b.push((1, r0 as u32, -1.0));
    a.push_row(&[(0, 1.0)]); // x <= upper
    ConicProgram {
        n: 1,
        tikhonov: eps,
        q: vec![c],
        a: a.finish(),
        b: vec![-lower, upper],
        cones: vec![Cone::Nonneg, Cone::Nonneg],
        obj_const: 0.0,
        param_dim: 2,
        maps,
    }
}

#[test]
fn tikhonov_quadratic_minimum() {
    // min x^2/2 + 2x in a wide box -> x* = -2
    let prog = scalar_program(2.0, -10.0, 10.0, 1.0);
    let pt = solve(&prog, 1.0).unwrap();
    assert_eq!(pt.status, SolveStatus::Optimal);
    assert!((pt.x[0] + 2.0).abs() < 1e-7, "x = {}", pt.x[0]);
}

#[test]
fn active_lower_bound_and_dual() {
    // min x s.t. x >= 3 -> x* = 3, dual on the bound = 1
    let prog = scalar_program(1.0, 3.0, 10.0, 0.0);
    let pt = solve(&prog, 0.0).unwrap();
    assert!((pt.x[0] - 3.0).abs() < 1e-7);
    assert!((pt.lambda[0] - 1.0).abs() < 1e-6);
    assert!(pt.s[0].abs() < 1e-7);
}

#[test]
fn matches_independent_simplex_on_random_lps() {
    let mut rng = SplitMix64::new(314159);
    let mut solved = 0;
    for trial in 0..30 {
        let prog = random_parameterized_lp(&mut rng, trial % 3 == 0);
        let oracle = common::simplex_oracle(&prog).expect("generator emits feasible bounded LPs");
        let pt = solve(&prog, 0.0).unwrap();
        assert_eq!(pt.status, SolveStatus::Optimal);
        let denom = 1.0 + oracle.1.abs();
        assert!(
            (pt.objective - oracle.1).abs() / denom < 1e-6,
            "trial {trial}: ipm {} vs simplex {}",
            pt.objective,
            oracle.1
        );
        solved += 1;
    }
    assert_eq!(solved, 30);
}

#[test]
fn kkt_residuals_meet_tolerances_on_corpus() {
    let mut rng = SplitMix64::new(2718);
    for trial in 0..20 {
        let prog = random_parameterized_lp(&mut rng, trial % 2 == 0);
        let pt = solve(&prog, if trial % 4 == 0 { 1e-6 } else { 0.0 }).unwrap();
        assert!(pt.residuals.dual <= 1e-8, "dual {}", pt.residuals.dual);
        assert!(pt.residuals.primal <= 1e-8, "primal {}", pt.residuals.primal);
        assert!(pt.residuals.complementarity.abs() <= 1e-8, "comp {}", pt.residuals.complementarity);
        for (r, cone) in prog.cones.iter().enumerate() {
            if *cone == Cone::Nonneg {
                assert!(pt.s[r] >= 0.0 && pt.lambda[r] >= 0.0);
            } else {
                assert_eq!(pt.s[r], 0.0);
            }
        }
    }
}

#[test]
fn derivative_tracks_active_bound() {
    // min c x s.t. x >= l at c > 0: dx*/dl = 1, dx*/dc = 0.
    let prog = scalar_program(1.0, 3.0, 10.0, 1e-6);
    let pt = solve(&prog, 1e-6).unwrap();
    let grad = differentiate(&prog, &pt, &[1.0]).unwrap();
    assert!((grad[1] - 1.0).abs() < 1e-6, "dx/dl = {}", grad[1]);
    assert!(grad[0].abs() < 1e-5, "dx/dc = {}", grad[0]);
}

#[test]
fn derivative_of_regularized_linear_objective() {
    // min eps |x|^2/2 + q x with inactive box: dx*/dq = -1/eps.
    let eps = 0.5;
    let prog = scalar_program(0.3, -10.0, 10.0, eps);
    let pt = solve(&prog, eps).unwrap();
    assert!((pt.x[0] + 0.3 / eps).abs() < 1e-7);
    let grad = differentiate(&prog, &pt, &[1.0]).unwrap();
    assert!((grad[0] + 1.0 / eps).abs() < 1e-5, "dx/dq = {}", grad[0]);
}

/// Central finite differences over eta of L = g' x*(eta).
fn fd_eta_gradient(prog: &ConicProgram, g: &[f64], eps: f64, h: f64) -> Vec<f64> {
    let mut fd = vec![0.0; prog.param_dim];
    for k in 0..prog.param_dim {
        let mut delta = vec![0.0; prog.param_dim];
        delta[k] = h;
        let mut p_plus = prog.clone();
        p_plus.apply_param_delta(&delta);
        let x_plus = solve(&p_plus, eps).unwrap().x;
        delta[k] = -h;
        let mut p_minus = prog.clone();
        p_minus.apply_param_delta(&delta);
        let x_minus = solve(&p_minus, eps).unwrap().x;
        let lp: f64 = g.iter().zip(&x_plus).map(|(a, b)| a * b).sum();
        let lm: f64 = g.iter().zip(&x_minus).map(|(a, b)| a * b).sum();
        fd[k] = (lp - lm) / (2.0 * h);
    }
    fd
}

#[test]
fn adjoints_match_finite_differences_on_random_programs() {
    let mut rng = SplitMix64::new(90210);
    let eps = 1e-6;
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 12 && attempts < 60 {
        attempts += 1;
        let prog = random_parameterized_lp(&mut rng, attempts % 3 == 0);
        let pt = solve(&prog, eps).unwrap();
        if strict_complementarity_margin(&prog, &pt) < 1e-4 {
            continue; // degenerate optimum: sensitivities are one-sided
        }
        let g: Vec<f64> = (0..prog.n).map(|i| 0.5 + 0.25 * i as f64).collect();
        let ad = differentiate(&prog, &pt, &g).unwrap();
        let fd = fd_eta_gradient(&prog, &g, eps, 1e-4);
        // The floor absorbs finite-difference noise (solver tolerance / h)
        // on programs whose optimum barely moves with the parameters.
        let err = rel_error(&ad, &fd, 1e-4);
        assert!(err < 1e-3, "attempt {attempts}: rel err {err}\nad {ad:?}\nfd {fd:?}");
        checked += 1;
    }
    assert!(checked >= 12, "only {checked} nondegenerate programs in {attempts} attempts");
}

#[test]
fn epsilon_limit_leaves_objective_unchanged() {
    let mut rng = SplitMix64::new(555);
    for _ in 0..5 {
        let prog = random_parameterized_lp(&mut rng, false);
        let lp = solve(&prog, 0.0).unwrap().objective;
        let reg = solve(&prog, 1e-8).unwrap().objective;
        assert!((lp - reg).abs() / (1.0 + lp.abs()) < 1e-5, "lp {lp} vs reg {reg}");
    }
}

#[test]
fn detects_infeasible() {
    // x >= 1 and x <= 0.
    let mut a = SparseMat::builder(1);
    a.push_row(&[(0, -1.0)]);
    a.push_row(&[(0, 1.0)]);
    let prog = ConicProgram {
        n: 1,
        tikhonov: 0.0,
        q: vec![0.0],
        a: a.finish(),
        b: vec![-1.0, 0.0],
        cones: vec![Cone::Nonneg, Cone::Nonneg],
        obj_const: 0.0,
        param_dim: 0,
        maps: ParamMaps::default(),
    };
    match solve(&prog, 0.0) {
        Err(QpError::Infeasible { .. }) | Err(QpError::MaxIter { .. }) => {}
        other => panic!("expected infeasibility, got {other:?}"),
    }
}

#[test]
fn detects_unbounded() {
    // min -x s.t. x >= 0.
    let mut a = SparseMat::builder(1);
    a.push_row(&[(0, -1.0)]);
    let prog = ConicProgram {
        n: 1,
        tikhonov: 0.0,
        q: vec![-1.0],
        a: a.finish(),
        b: vec![0.0],
        cones: vec![Cone::Nonneg],
        obj_const: 0.0,
        param_dim: 0,
        maps: ParamMaps::default(),
    };
    match solve(&prog, 0.0) {
        Err(QpError::Unbounded) | Err(QpError::MaxIter { .. }) => {}
        other => panic!("expected unboundedness, got {other:?}"),
    }
}

fn one_vessel_task() -> Task {
    let mut sp = StaticParams::jurong_like(8);
    sp.n_cranes = 3;
    let vessel = VesselSpec {
        arrival_time: 1,
        max_leave_time: 6,
        cargo_volume: 140.0,
        min_qc: 1,
        max_qc: 2,
        base_power: 2.0,
        charge_demand: 3.0,
        charge_max: 2.0,
        length: 100.0,
        max_wait: 3,
    };
    Task::new("toy1", sp, vec![vessel], "test").unwrap()
}

fn toy_fix(task: &Task) -> SurrogateFix {
    let t_n = task.horizon();
    let mut berthing = vec![0.0; task.n_vessels() * t_n];
    for t in 2..=4 {
        berthing[t] = 1.0;
    }
    SurrogateFix { qc_power: vec![0.32; t_n], berthing }
}

#[test]
fn empty_day_ahead_program_has_zero_optimum() {
    let task = Task::new("empty", StaticParams::jurong_like(4), vec![], "t").unwrap();
    let fix = SurrogateFix { qc_power: vec![0.0; 4], berthing: vec![] };
    let da = build_day_ahead_convex(&task, &[0.0; 4], &[0.0; 4], &fix, &BuildOptions::default())
        .unwrap();
    let pt = solve(&da.program, 0.0).unwrap();
    // Zero prices, zero load, no vessels: doing nothing is optimal and the
    // objective is exactly zero. The optimal face is flat in the bid, so
    // only the objective and the pinned storage state are asserted.
    assert!(pt.objective.abs() < 1e-7);
    assert!((pt.x[da.vars.energy] - task.static_params.ess.e_init).abs() < 1e-6);
}

#[test]
fn day_ahead_and_real_time_agree_under_perfect_foresight() {
    let task = one_vessel_task();
    let t_n = task.horizon();
    let prices: Vec<f64> = vec![30.0, 25.0, 10.0, 12.0, 40.0, 45.0, 20.0, 15.0];
    let net_load: Vec<f64> = vec![3.0, 3.5, 4.0, 4.2, 5.0, 4.8, 3.9, 3.2];
    let fix = toy_fix(&task);
    let opts = BuildOptions::default();
    let da = build_day_ahead_convex(&task, &prices, &net_load, &fix, &opts).unwrap();
    let pt = solve(&da.program, 0.0).unwrap();
    assert_eq!(pt.status, SolveStatus::Optimal);

    // At the day-ahead optimum the bid equals planned consumption: strictly
    // penalized deviations vanish when prices are positive, and the split
    // variables are componentwise complementary.
    for t in 0..t_n {
        let dev = pt.x[da.vars.consumption + t] - pt.x[da.vars.bid + t];
        assert!(dev.abs() < 1e-6, "slot {t}: deviation {dev}");
        let prod = pt.x[da.vars.dev_pos + t] * pt.x[da.vars.dev_neg + t];
        assert!(prod.abs() < 1e-8, "slot {t}: dev+ * dev- = {prod}");
    }

    let rt_fix = DayAheadFix {
        bid: pt.x[da.vars.bid..da.vars.bid + t_n].to_vec(),
        ess_ch: pt.x[da.vars.ess_ch..da.vars.ess_ch + t_n].to_vec(),
        ess_dch: pt.x[da.vars.ess_dch..da.vars.ess_dch + t_n].to_vec(),
        qc_power: fix.qc_power.clone(),
        berthing: fix.berthing.clone(),
    };
    let rt = build_real_time(&task, &rt_fix, &prices, &net_load, &opts).unwrap();
    let rt_pt = solve(&rt.program, 0.0).unwrap();
    assert_eq!(rt_pt.status, SolveStatus::Optimal);
    assert!(
        (rt_pt.objective - pt.objective).abs() / (1.0 + pt.objective.abs()) < 1e-6,
        "da {} vs rt {}",
        pt.objective,
        rt_pt.objective
    );
    // Real-time consumption reproduces the day-ahead plan.
    for t in 0..t_n {
        let diff = rt_pt.x[rt.vars.consumption + t] - pt.x[da.vars.consumption + t];
        assert!(diff.abs() < 1e-5, "slot {t}: {diff}");
    }
}

#[test]
fn real_time_deviation_priced_at_imbalance_factors() {
    // No vessels: one extra MW of realized net load in one slot forces an
    // upward deviation priced at rho+ * pi.
    let task = Task::new("empty", StaticParams::jurong_like(4), vec![], "t").unwrap();
    let fix = SurrogateFix { qc_power: vec![0.0; 4], berthing: vec![] };
    let prices = vec![10.0, 10.0, 10.0, 10.0];
    let forecast_load = vec![2.0, 2.0, 2.0, 2.0];
    let opts = BuildOptions::default();
    let da = build_day_ahead_convex(&task, &prices, &forecast_load, &fix, &opts).unwrap();
    let pt = solve(&da.program, 0.0).unwrap();

    let mut actual_load = forecast_load.clone();
    actual_load[2] += 1.0;
    let rt_fix = DayAheadFix {
        bid: pt.x[da.vars.bid..da.vars.bid + 4].to_vec(),
        ess_ch: pt.x[da.vars.ess_ch..da.vars.ess_ch + 4].to_vec(),
        ess_dch: pt.x[da.vars.ess_dch..da.vars.ess_dch + 4].to_vec(),
        qc_power: vec![0.0; 4],
        berthing: vec![],
    };
    let rt = build_real_time(&task, &rt_fix, &prices, &actual_load, &opts).unwrap();
    let rt_pt = solve(&rt.program, 0.0).unwrap();
    let added = rt_pt.objective - pt.objective;
    let expect = task.static_params.imbalance.rho_pos * 10.0 * 1.0;
    assert!((added - expect).abs() < 1e-5, "added {added}, expected {expect}");
    assert!((rt_pt.x[rt.vars.dev_pos + 2] - 1.0).abs() < 1e-6);
}

#[test]
fn qp_node_gradients_flow_through_graph() {
    // Load-parameterized toy day-ahead: d(price-weighted bid)/d(net load)
    // flows through the balance right-hand side, which is the smooth,
    // always-active sensitivity path of the layer. Checked against finite
    // differences through the full graph.
    let task = one_vessel_task();
    let t_n = task.horizon();
    let prices: Vec<f64> = vec![30.0, 25.0, 10.0, 12.0, 40.0, 45.0, 20.0, 15.0];
    let fix = toy_fix(&task);
    let opts = BuildOptions { tikhonov: 1e-6, ..Default::default() };

    let template = {
        let task = task.clone();
        let prices = prices.clone();
        let fix = fix.clone();
        let opts = opts.clone();
        move |inputs: &[&Tensor]| -> Result<ConicProgram, String> {
            let net_load = inputs[0].data().to_vec();
            let t_n = net_load.len();
            let mut da = build_day_ahead_convex(&task, &prices, &net_load, &fix, &opts)
                .map_err(|e| e.to_string())?;
            // eta here is the net load only: shift that block to the front
            // and drop the rest of the maps.
            da.program.param_dim = t_n;
            da.program.maps.q.clear();
            da.program.maps.a.retain(|&(p, _, _, _)| (t_n..2 * t_n).contains(&(p as usize)));
            da.program.maps.b.retain(|&(p, _, _)| (t_n..2 * t_n).contains(&(p as usize)));
            for e in da.program.maps.a.iter_mut() {
                e.0 -= t_n as u32;
            }
            for e in da.program.maps.b.iter_mut() {
                e.0 -= t_n as u32;
            }
            Ok(da.program)
        }
    };
    let op = Arc::new(ConicQpOp::new(
        "day_ahead_toy",
        Arc::new(template),
        vec![(0, t_n)], // the bid block
        vec![1e-6],
        SolverOptions::default(),
    ));

    let net_load: Vec<f64> = vec![3.0, 3.5, 4.0, 4.2, 5.0, 4.8, 3.9, 3.2];
    let run = |p: &[f64], want_grad: bool| -> (f64, Option<Vec<f64>>) {
        let mut g = Graph::new();
        let pin = g.param("net_load", Tensor::vector(p.to_vec()));
        let outs = g.custom(op.clone(), &[pin]);
        let w = g.constant(Tensor::vector(prices.clone()));
        let weighted = g.mul(outs[0], w);
        let loss = g.sum(weighted);
        g.mark_output("loss", loss);
        g.forward(&BTreeMap::new()).unwrap();
        let val = g.output_value(loss).unwrap().value();
        if want_grad {
            let grads = g.backward(loss, 1.0).unwrap();
            (val, Some(grads["net_load"].data().to_vec()))
        } else {
            (val, None)
        }
    };

    let (_, ad) = run(&net_load, true);
    let ad = ad.unwrap();
    let h = 1e-5;
    let mut fd = vec![0.0; t_n];
    for k in 0..t_n {
        let mut up = net_load.clone();
        up[k] += h;
        let mut dn = net_load.clone();
        dn[k] -= h;
        fd[k] = (run(&up, false).0 - run(&dn, false).0) / (2.0 * h);
    }
    let err = rel_error(&ad, &fd, 1e-4);
    assert!(err < 1e-3, "rel err {err}\nad {ad:?}\nfd {fd:?}");
}
