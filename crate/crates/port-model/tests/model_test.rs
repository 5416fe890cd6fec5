use port_model::*;

fn toy_static(horizon: usize) -> StaticParams {
    let mut sp = StaticParams::jurong_like(horizon);
    sp.n_cranes = 3;
    sp
}

fn one_vessel_task(horizon: usize) -> Task {
    let vessel = VesselSpec {
        arrival_time: 1,
        max_leave_time: 6,
        cargo_volume: 140.0, // 2 crane-slots at 70 TEU/h
        min_qc: 1,
        max_qc: 2,
        base_power: 2.0,
        charge_demand: 3.0,
        charge_max: 2.0,
        length: 100.0,
        max_wait: 3,
    };
    Task::new("toy1", toy_static(horizon), vec![vessel], "test").unwrap()
}

/// Hand-built feasible solution for the one-vessel toy: berth [2,3] with one
/// crane in each slot, charge 1.5 MW in both slots, storage idle.
fn toy_solution(task: &Task, prices: &[f64], net_load: &[f64]) -> ScheduleSolution {
    let t_n = task.horizon();
    let placements = vec![Placement { berth_pos: 0.0, t_in: 2, t_out: 3 }];
    let counts = vec![(0..t_n).map(|t| usize::from(t == 2 || t == 3)).collect::<Vec<_>>()];
    let discrete = DiscreteAssignment::from_counts(placements, &counts, t_n, task.static_params.n_cranes);
    let qc = discrete.quay_crane_power(task.static_params.crane_rated_power);
    let mut vessel_charge = vec![0.0; t_n];
    vessel_charge[2] = 1.5;
    vessel_charge[3] = 1.5;
    let shore_power: Vec<f64> = (0..t_n)
        .map(|t| if t == 2 || t == 3 { 2.0 + vessel_charge[t] } else { 0.0 })
        .collect();
    let consumption: Vec<f64> =
        (0..t_n).map(|t| shore_power[t] + qc[t] + net_load[t]).collect();
    let bid = consumption.clone();
    let energy = vec![task.static_params.ess.e_init; t_n + 1];
    let objective = evaluate_cost(&task.static_params.imbalance, &bid, &consumption, prices);
    ScheduleSolution {
        bid,
        consumption,
        ess_charge: vec![0.0; t_n],
        ess_discharge: vec![0.0; t_n],
        quay_crane_power: qc,
        shore_power,
        vessel_charge,
        energy,
        discrete,
        objective,
        prices: prices.to_vec(),
        net_load: net_load.to_vec(),
    }
}

#[test]
fn cost_zero_deviation_is_price_times_bid() {
    let im = ImbalancePrices { rho_pos: 1.8, rho_neg: 0.5 };
    let pb = vec![3.0, 1.0, 2.0];
    let pi = vec![10.0, 20.0, 5.0];
    assert_eq!(evaluate_cost(&im, &pb, &pb, &pi), 30.0 + 20.0 + 10.0);
}

#[test]
fn cost_upward_deviation() {
    let im = ImbalancePrices { rho_pos: 1.8, rho_neg: 0.5 };
    let c = evaluate_cost(&im, &[1.0], &[2.0], &[10.0]);
    assert!((c - 28.0).abs() < 1e-12); // 10 + 1.8 * 10 * 1
}

#[test]
fn cost_downward_deviation() {
    let im = ImbalancePrices { rho_pos: 1.8, rho_neg: 0.5 };
    let c = evaluate_cost(&im, &[2.0], &[1.0], &[10.0]);
    assert!((c - 15.0).abs() < 1e-12); // 20 - 0.5 * 10 * 1
}

#[test]
fn fixture_task1_first_vessel_matches_table() {
    let task = load_fixture(1).unwrap();
    assert_eq!(task.vessels.len(), 9);
    let v = &task.vessels[0];
    assert_eq!(v.arrival_time, 0);
    assert_eq!(v.max_leave_time, 14);
    assert_eq!(v.cargo_volume, 2866.0);
    assert_eq!(v.min_qc, 1);
    assert_eq!(v.max_qc, 3);
    assert_eq!(v.base_power, 4.0);
    assert_eq!(v.charge_demand, 7.0);
    assert_eq!(v.charge_max, 1.59);
    assert_eq!(v.length, 148.0);
    assert_eq!(v.max_wait, 5);
}

#[test]
fn fixture_ship_counts_and_task5_has_no_charging() {
    for id in 1..=6 {
        let task = load_fixture(id).unwrap();
        let expected = if id == 4 { 11 } else { 9 };
        assert_eq!(task.vessels.len(), expected, "task {id}");
    }
    let task5 = load_fixture(5).unwrap();
    assert!(task5.vessels.iter().all(|v| v.charge_demand == 0.0 && v.charge_max == 0.0));
    assert!(task5.charging_vessels().is_empty());
}

#[test]
fn fixtures_pass_static_feasibility() {
    for id in 1..=6 {
        let task = load_fixture(id).unwrap();
        check_static_feasibility(&task).unwrap();
    }
}

#[test]
fn unknown_fixture_id_errors() {
    assert!(load_fixture(0).is_err());
    assert!(load_fixture(7).is_err());
}

#[test]
fn task_json_round_trip() {
    let json = r#"{
        "id": "custom",
        "horizon": 16,
        "vessels": [{
            "arrival_time": 1, "max_leave_time": 9, "cargo_volume": 280,
            "min_quay_crane": 1, "max_quay_crane": 2, "base_power_load": 1.5,
            "charge_power_demand": 2.0, "charge_power_max": 1.0,
            "length": 120, "max_waiting_time": 4
        }]
    }"#;
    let task = task_from_json(json).unwrap();
    assert_eq!(task.id, "custom");
    assert_eq!(task.horizon(), 16);
    assert_eq!(task.vessels[0].work_slots(70.0), 4);
}

#[test]
fn oversized_vessel_fails_static_feasibility() {
    let v = VesselSpec {
        arrival_time: 0,
        max_leave_time: 5,
        cargo_volume: 100.0,
        min_qc: 1,
        max_qc: 1,
        base_power: 1.0,
        charge_demand: 0.0,
        charge_max: 0.0,
        length: 900.0,
        max_wait: 2,
    };
    // Construction stays permissive; the feasibility screen flags it.
    let task = Task::new("bad", StaticParams::jurong_like(8), vec![v], "t").unwrap();
    assert!(matches!(
        check_static_feasibility(&task),
        Err(PortError::StaticInfeasible { .. })
    ));
}

#[test]
fn validator_accepts_hand_built_solution() {
    let task = one_vessel_task(8);
    let prices = vec![10.0, 12.0, 8.0, 9.0, 20.0, 25.0, 15.0, 11.0];
    let net_load = vec![1.0; 8];
    let sol = toy_solution(&task, &prices, &net_load);
    let report = validate_schedule(&task, &sol);
    assert!(report.is_empty(), "unexpected violations: {:?}", report.violations);
}

#[test]
fn validator_flags_energy_above_cap() {
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let net_load = vec![1.0; 8];
    let mut sol = toy_solution(&task, &prices, &net_load);
    sol.energy[4] = task.static_params.ess.e_max + 0.5;
    let report = validate_schedule(&task, &sol);
    let upper: Vec<_> =
        report.violations.iter().filter(|v| v.constraint == "ess_energy_upper").collect();
    assert_eq!(upper.len(), 1);
    assert!((upper[0].magnitude - 0.5).abs() < 1e-9);
    // The perturbation also breaks the dynamics rows around slot 4.
    assert!(report.violations.iter().all(|v| {
        v.constraint == "ess_energy_upper" || v.constraint == "ess_dynamics"
    }));
}

#[test]
fn validator_flags_spatial_temporal_overlap() {
    let mut sp = toy_static(8);
    sp.berth_length = 150.0;
    let mk = |arr: usize| VesselSpec {
        arrival_time: arr,
        max_leave_time: 7,
        cargo_volume: 140.0,
        min_qc: 1,
        max_qc: 2,
        base_power: 1.0,
        charge_demand: 0.0,
        charge_max: 0.0,
        length: 100.0,
        max_wait: 5,
    };
    let task = Task::new("overlap", sp, vec![mk(0), mk(0)], "t").unwrap();
    let placements = vec![
        Placement { berth_pos: 0.0, t_in: 0, t_out: 1 },
        Placement { berth_pos: 40.0, t_in: 1, t_out: 2 },
    ];
    let counts = vec![
        (0..8).map(|t| usize::from(t <= 1)).collect::<Vec<_>>(),
        (0..8).map(|t| usize::from(t == 1 || t == 2)).collect::<Vec<_>>(),
    ];
    let discrete = DiscreteAssignment::from_counts(placements, &counts, 8, 3);
    let qc = discrete.quay_crane_power(task.static_params.crane_rated_power);
    let shore: Vec<f64> = (0..8)
        .map(|t| {
            (0..2)
                .filter(|&j| discrete.berthed_at(j, t))
                .map(|_| 1.0)
                .sum::<f64>()
        })
        .collect();
    let net = vec![0.5; 8];
    let cons: Vec<f64> = (0..8).map(|t| shore[t] + qc[t] + net[t]).collect();
    let prices = vec![10.0; 8];
    let objective = evaluate_cost(&task.static_params.imbalance, &cons, &cons, &prices);
    let sol = ScheduleSolution {
        bid: cons.clone(),
        consumption: cons,
        ess_charge: vec![0.0; 8],
        ess_discharge: vec![0.0; 8],
        quay_crane_power: qc,
        shore_power: shore,
        vessel_charge: vec![0.0; 16],
        energy: vec![task.static_params.ess.e_init; 9],
        discrete,
        objective,
        prices,
        net_load: net,
    };
    let report = validate_schedule(&task, &sol);
    assert!(report.violations.iter().any(|v| v.constraint == "berth_overlap"));
}

#[test]
fn ess_dynamics_arithmetic() {
    // Charging 1 MW for one slot at eta 0.9 raises energy by exactly 0.9 MWh;
    // discharging 1 MW lowers it by 1/0.9 MWh.
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let net_load = vec![1.0; 8];
    let mut sol = toy_solution(&task, &prices, &net_load);
    sol.ess_charge[0] = 1.0;
    sol.ess_discharge[5] = 0.5;
    let e0 = task.static_params.ess.e_init;
    for t in 0..8 {
        sol.energy[t + 1] = sol.energy[t] + 0.9 * sol.ess_charge[t] - sol.ess_discharge[t] / 0.9;
    }
    assert!((sol.energy[1] - (e0 + 0.9)).abs() < 1e-12);
    assert!((sol.energy[6] - (e0 + 0.9 - 0.5 / 0.9)).abs() < 1e-12);
    // Ends above the initial level, so the cyclic terminal rule holds.
    assert!(sol.energy[8] >= e0);
    // Fix the balance so only the ESS rows are exercised.
    for t in 0..8 {
        sol.consumption[t] = sol.shore_power[t] + sol.quay_crane_power[t] - sol.ess_discharge[t]
            + sol.ess_charge[t]
            + net_load[t];
        sol.bid[t] = sol.consumption[t];
    }
    sol.objective = evaluate_cost(&task.static_params.imbalance, &sol.bid, &sol.consumption, &prices);
    let report = validate_schedule(&task, &sol);
    assert!(report.is_empty(), "violations: {:?}", report.violations);
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
fn day_ahead_builder_dimensions_and_cones() {
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let load = vec![1.0; 8];
    let da = build_day_ahead_convex(&task, &prices, &load, &toy_fix(&task), &BuildOptions::default())
        .unwrap();
    let t_n = 8;
    assert_eq!(da.vars.n, 7 * t_n + 1 + t_n); // one charging vessel
    let n_zero = da.program.cones.iter().filter(|c| **c == Cone::Zero).count();
    assert_eq!(n_zero, 3 * t_n + 1);
    assert_eq!(da.program.n_rows(), da.program.cones.len());
    assert_eq!(da.eta.dim(), 3 * t_n + task.n_vessels() * t_n);
    // Objective carries prices on bid and deviations.
    assert_eq!(da.program.q[da.vars.bid], 10.0);
    assert_eq!(da.program.q[da.vars.dev_pos], 18.0);
    assert_eq!(da.program.q[da.vars.dev_neg], -5.0);
}

#[test]
fn day_ahead_rows_match_hand_enumeration_for_one_vessel() {
    // J = 1, T = 8, one charging vessel: the convexified program has
    //   zero rows:    8 split + 8 balance + 8 dynamics + 1 initial = 25
    //   nonneg rows:  16 dev signs + 32 storage power + 16 energy + 1 terminal
    //               + 32 bid/consumption + 16 charge bounds + 1 demand = 114
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let load = vec![1.0; 8];
    let da = build_day_ahead_convex(&task, &prices, &load, &toy_fix(&task), &BuildOptions::default())
        .unwrap();
    let zeros = da.program.cones.iter().filter(|c| **c == Cone::Zero).count();
    let nonneg = da.program.cones.iter().filter(|c| **c == Cone::Nonneg).count();
    assert_eq!(zeros, 25);
    assert_eq!(nonneg, 114);

    // Spot-check the balance row at t = 3 (berthed, vhat = 1): the charge
    // column enters with -1 and the rhs carries qc + net load + base.
    let row = 8 + 3;
    let terms: Vec<(usize, f64)> = da.program.a.row(row).collect();
    assert!(terms.contains(&(da.vars.consumption + 3, 1.0)));
    assert!(terms.contains(&(da.vars.ess_dch + 3, 1.0)));
    assert!(terms.contains(&(da.vars.ess_ch + 3, -1.0)));
    assert!(terms.contains(&(da.vars.idx_charge(0, 3), -1.0)));
    assert!((da.program.b[row] - (0.32 + 1.0 + 2.0)).abs() < 1e-12);
}

#[test]
fn day_ahead_charge_demand_infeasibility_reported_before_solve() {
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let load = vec![1.0; 8];
    // Berthing surface too thin to deliver 3 MWh at 2 MW cap.
    let mut fix = toy_fix(&task);
    fix.berthing.iter_mut().for_each(|v| *v = 0.0);
    fix.berthing[2] = 1.0;
    let err = build_day_ahead_convex(&task, &prices, &load, &fix, &BuildOptions::default());
    assert!(matches!(err, Err(PortError::ChargeDemandInfeasible { vessel: 0, .. })));
}

#[test]
fn relaxing_berthing_upward_grows_charge_caps() {
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let load = vec![1.0; 8];
    let fix_binary = toy_fix(&task);
    let mut fix_relaxed = fix_binary.clone();
    for v in fix_relaxed.berthing.iter_mut() {
        *v = (*v + 0.3).min(1.0);
    }
    let da0 =
        build_day_ahead_convex(&task, &prices, &load, &fix_binary, &BuildOptions::default()).unwrap();
    let da1 =
        build_day_ahead_convex(&task, &prices, &load, &fix_relaxed, &BuildOptions::default()).unwrap();
    // Charge upper-bound rows: cap * vhat grows row by row.
    for (r0, r1) in da0.program.b.iter().zip(&da1.program.b).skip(25).take(114) {
        let _ = (r0, r1);
    }
    // Locate charge upper rows via the cap map entries.
    for (&(_, row0, _), &(_, row1, _)) in da0
        .program
        .maps
        .b
        .iter()
        .filter(|(p, _, _)| *p as usize >= 24)
        .zip(da1.program.maps.b.iter().filter(|(p, _, _)| *p as usize >= 24))
    {
        assert!(da1.program.b[row1 as usize] >= da0.program.b[row0 as usize] - 1e-12);
    }
}

#[test]
fn program_data_affine_in_eta() {
    let task = one_vessel_task(8);
    let t_n = 8;
    let prices: Vec<f64> = (0..t_n).map(|t| 10.0 + t as f64).collect();
    let load: Vec<f64> = (0..t_n).map(|t| 1.0 + 0.1 * t as f64).collect();
    let fix = toy_fix(&task);
    let opts = BuildOptions { tikhonov: 1e-6, ..Default::default() };
    let mut da = build_day_ahead_convex(&task, &prices, &load, &fix, &opts).unwrap();

    // Perturb every eta block and compare the map-updated program with a
    // fresh build at the perturbed parameters.
    let mut delta = vec![0.0; da.eta.dim()];
    for (i, d) in delta.iter_mut().enumerate() {
        *d = 0.01 * ((i % 7) as f64 - 3.0);
    }
    // Keep the berthing surface inside [0, 1].
    let (vs, vl) = da.eta.span("berthing").unwrap();
    for i in 0..vl {
        let cur = fix.berthing[i];
        delta[vs + i] = delta[vs + i].clamp(-cur, 1.0 - cur);
    }
    da.program.apply_param_delta(&delta);

    let prices2: Vec<f64> = prices.iter().enumerate().map(|(t, p)| p + delta[t]).collect();
    let load2: Vec<f64> = load.iter().enumerate().map(|(t, p)| p + delta[t_n + t]).collect();
    let fix2 = SurrogateFix {
        qc_power: fix.qc_power.iter().enumerate().map(|(t, p)| p + delta[2 * t_n + t]).collect(),
        berthing: fix.berthing.iter().enumerate().map(|(i, p)| p + delta[vs + i]).collect(),
    };
    let db = build_day_ahead_convex(&task, &prices2, &load2, &fix2, &opts).unwrap();

    for (a, b) in da.program.q.iter().zip(&db.program.q) {
        assert!((a - b).abs() < 1e-12);
    }
    for (a, b) in da.program.b.iter().zip(&db.program.b) {
        assert!((a - b).abs() < 1e-12);
    }
    assert_eq!(da.program.a.cols, db.program.a.cols);
    for (a, b) in da.program.a.vals.iter().zip(&db.program.a.vals) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn real_time_prunes_unberthed_cells_under_binary_surface() {
    let task = one_vessel_task(8);
    let fix = DayAheadFix {
        bid: vec![3.0; 8],
        ess_ch: vec![0.0; 8],
        ess_dch: vec![0.0; 8],
        qc_power: vec![0.32; 8],
        berthing: toy_fix(&task).berthing,
    };
    let rt = build_real_time(&task, &fix, &[10.0; 8], &[1.0; 8], &BuildOptions::default()).unwrap();
    // Berthed slots 2..=4 only.
    assert_eq!(rt.vars.charge_cells, vec![(0, 2), (0, 3), (0, 4)]);
    assert_eq!(rt.vars.n, 3 * 8 + 3);
}

#[test]
fn real_time_reports_undeliverable_demand() {
    let task = one_vessel_task(8);
    let mut berthing = vec![0.0; 8];
    berthing[2] = 1.0; // one slot at 2 MW cap < 3 MWh demand
    let fix = DayAheadFix {
        bid: vec![3.0; 8],
        ess_ch: vec![0.0; 8],
        ess_dch: vec![0.0; 8],
        qc_power: vec![0.0; 8],
        berthing,
    };
    let err = build_real_time(&task, &fix, &[10.0; 8], &[1.0; 8], &BuildOptions::default());
    assert!(matches!(err, Err(PortError::ChargeDemandInfeasible { .. })));
}

#[test]
fn mixed_integer_description_matches_hand_enumeration() {
    // J = 1, T = 8, K = 3, one charging vessel. Hand count per family:
    //   vessel_window: arrival 1 (1 row) + after deadline 6 (1 row) = 2
    //   single_run 1, run_start 8, max_waiting 2, service_duration 2
    //   crane_count_bounds 16, crane_exclusivity 24, crane_contiguity 8
    //   qc_power_definition 8, shore_power_definition 8
    //   charge_power_cap 8, charge_demand 1, ess_dynamics 8,
    //   ess_initial_energy 1, ess_terminal_energy 1, deviation_split 8,
    //   power_balance 8. No pairs, so no berth_overlap rows.
    let task = one_vessel_task(8);
    let prices = vec![10.0; 8];
    let load = vec![1.0; 8];
    let mi = build_day_ahead_mixed_integer(&task, &prices, &load).unwrap();

    let expect = [
        ("vessel_window", 2),
        ("single_run", 1),
        ("run_start", 8),
        ("max_waiting", 2),
        ("service_duration", 2),
        ("crane_count_bounds", 16),
        ("crane_exclusivity", 24),
        ("crane_contiguity", 8),
        ("berth_overlap", 0),
        ("qc_power_definition", 8),
        ("shore_power_definition", 8),
        ("charge_power_cap", 8),
        ("charge_demand", 1),
        ("ess_dynamics", 8),
        ("ess_initial_energy", 1),
        ("ess_terminal_energy", 1),
        ("deviation_split", 8),
        ("power_balance", 8),
    ];
    for (label, count) in expect {
        assert_eq!(mi.rows_labeled(label).len(), count, "family {label}");
    }
    let total: usize = expect.iter().map(|(_, c)| c).sum();
    assert_eq!(mi.rows.len(), total);

    // Spot-check the service-duration rows: cargo 140 TEU at 70 TEU/h with
    // 1..=2 cranes means 1..=2 berthed slots.
    let dur = mi.rows_labeled("service_duration");
    assert_eq!(dur[0].rel, Rel::Ge);
    assert_eq!(dur[0].rhs, 1.0);
    assert_eq!(dur[1].rel, Rel::Le);
    assert_eq!(dur[1].rhs, 2.0);

    // Big-M pairs appear once a second vessel exists.
    let mut vessels = task.vessels.clone();
    vessels.push(vessels[0].clone());
    let task2 = Task::new("toy2", toy_static(8), vessels, "test").unwrap();
    let mi2 = build_day_ahead_mixed_integer(&task2, &prices, &load).unwrap();
    // 2 spatial + 2 temporal + 1 cover per unordered pair.
    assert_eq!(mi2.rows_labeled("berth_overlap").len(), 5);
    let spatial = &mi2.rows_labeled("berth_overlap")[0];
    assert!(spatial.terms.iter().any(|&(_, c)| c == task2.static_params.berth_length));
}

#[test]
fn empty_task_builds_trivial_program() {
    let task = Task::new("empty", toy_static(4), vec![], "test").unwrap();
    let fix = SurrogateFix { qc_power: vec![0.0; 4], berthing: vec![] };
    let da = build_day_ahead_convex(&task, &[0.0; 4], &[0.0; 4], &fix, &BuildOptions::default())
        .unwrap();
    assert_eq!(da.vars.n, 7 * 4 + 1);
    assert!(da.vars.charge_vessels.is_empty());
    // All-zero data: the zero point is feasible with objective 0.
    assert!(da.program.q.iter().all(|&v| v == 0.0));
}
