//! Internal plan representation and the continuous machinery shared by the
//! heuristic search and the exact oracle.
//!
//! With the discrete surface fixed and prices nonnegative, the day-ahead
//! co-optimization separates: the bid equals planned consumption (deviations
//! are strictly penalized), storage arbitrage is an independent small LP,
//! vessel charging fills its cheapest berthed slots, and crane counts sit at
//! each vessel's minimum while berthed (service durations already encode the
//! crane commitment through their cargo-rate bounds).

use port_model::{
    evaluate_cost, ConicProgram, Cone, DiscreteAssignment, ParamMaps, Placement,
    ScheduleSolution, SparseMat, Task, DT,
};
use qp_layer::solve_with;

use crate::error::{Result, SchedError};

/// One vessel's discrete choice: berthing window and berth position. Crane
/// counts are derived by the allocator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub t_in: usize,
    pub slots: usize,
    pub berth: f64,
}

impl Window {
    pub fn t_out(&self) -> usize {
        self.t_in + self.slots - 1
    }

    pub fn covers(&self, t: usize) -> bool {
        t >= self.t_in && t <= self.t_out()
    }
}

/// Admissible (t_in, slots) pairs for a vessel.
pub fn admissible_windows(task: &Task, vessel: usize) -> Vec<(usize, usize)> {
    let sp = &task.static_params;
    let v = &task.vessels[vessel];
    let t_last = sp.horizon - 1;
    let dl = v.max_leave_time.min(t_last);
    let s_min = v.min_service_slots(sp.crane_efficiency);
    let s_max = v.max_service_slots(sp.crane_efficiency);
    let mut out = Vec::new();
    for t_in in v.arrival_time..=(v.arrival_time + v.max_wait).min(t_last) {
        for s in s_min..=s_max {
            if t_in + s - 1 <= dl {
                out.push((t_in, s));
            }
        }
    }
    out
}

/// Bottom-left berth position for a vessel against already-placed windows,
/// or None if nothing fits.
pub fn bottom_left_position(
    task: &Task,
    vessel: usize,
    t_in: usize,
    slots: usize,
    placed: &[(usize, Window)],
) -> Option<f64> {
    let len = task.vessels[vessel].length;
    let l_tot = task.static_params.berth_length;
    let t_out = t_in + slots - 1;
    let overlapping: Vec<(f64, f64)> = placed
        .iter()
        .filter(|(_, w)| w.t_in <= t_out && t_in <= w.t_out())
        .map(|(j, w)| (w.berth, w.berth + task.vessels[*j].length))
        .collect();
    let mut candidates: Vec<f64> = vec![0.0];
    candidates.extend(overlapping.iter().map(|&(_, hi)| hi));
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    for y in candidates {
        if y + len > l_tot + 1e-9 {
            continue;
        }
        let clash = overlapping.iter().any(|&(lo, hi)| y < hi - 1e-9 && lo < y + len - 1e-9);
        if !clash {
            return Some(y);
        }
    }
    None
}

/// Crane counts produced by the allocator.
pub struct CraneAllocation {
    /// counts[j][t] over the full horizon (zero outside windows).
    pub counts: Vec<Vec<usize>>,
    pub crane_cost: f64,
}

pub fn allocate_cranes(
    task: &Task,
    windows: &[Window],
    prices: &[f64],
    _exact: bool,
) -> Result<CraneAllocation> {
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_v = windows.len();
    let rated = sp.crane_rated_power;

    // Service durations already encode the crane commitment; with
    // nonnegative prices the cheapest admissible profile runs the per-vessel
    // minimum while berthed. Negative-price slots are topped up to the
    // maximum within the shared crane pool.
    let mut counts = vec![vec![0usize; t_n]; n_v];
    let mut slot_used = vec![0usize; t_n];
    for (j, w) in windows.iter().enumerate() {
        let v = &task.vessels[j];
        for t in w.t_in..=w.t_out() {
            counts[j][t] = v.min_qc;
            slot_used[t] += v.min_qc;
        }
    }
    for (t, &used) in slot_used.iter().enumerate() {
        if used > sp.n_cranes {
            return Err(SchedError::Infeasible(format!(
                "slot {t}: minimum crane demand {used} exceeds {}",
                sp.n_cranes
            )));
        }
    }
    let mut order: Vec<usize> = (0..t_n).collect();
    order.sort_by(|&a, &b| prices[a].partial_cmp(&prices[b]).unwrap().then(a.cmp(&b)));
    for &t in &order {
        if prices[t] >= 0.0 {
            break;
        }
        let mut headroom = sp.n_cranes - slot_used[t];
        for (j, w) in windows.iter().enumerate() {
            if !w.covers(t) || headroom == 0 {
                continue;
            }
            let cap = task.vessels[j].max_qc - counts[j][t];
            let take = cap.min(headroom);
            counts[j][t] += take;
            slot_used[t] += take;
            headroom -= take;
        }
    }

    let mut crane_cost = 0.0;
    for counts_j in &counts {
        for t in 0..t_n {
            crane_cost += prices[t] * rated * counts_j[t] as f64;
        }
    }
    Ok(CraneAllocation { counts, crane_cost })
}

/// Optimal charging cost for one vessel over its window: fill the demand
/// into the cheapest berthed slots at the power cap, then top up
/// negative-price slots.
pub fn charge_schedule(task: &Task, vessel: usize, w: &Window, prices: &[f64]) -> Result<(Vec<f64>, f64)> {
    let v = &task.vessels[vessel];
    let t_n = task.static_params.horizon;
    let mut chg = vec![0.0; t_n];
    if v.charge_demand <= 0.0 {
        return Ok((chg, 0.0));
    }
    let mut slots: Vec<usize> = (w.t_in..=w.t_out()).collect();
    slots.sort_by(|&a, &b| prices[a].partial_cmp(&prices[b]).unwrap().then(a.cmp(&b)));
    let mut remaining = v.charge_demand;
    for &t in &slots {
        if remaining <= 0.0 && prices[t] >= 0.0 {
            break;
        }
        let take = if prices[t] < 0.0 { v.charge_max } else { (remaining / DT).min(v.charge_max) };
        chg[t] = take;
        remaining -= take * DT;
    }
    if remaining > 1e-9 {
        return Err(SchedError::Infeasible(format!(
            "vessel {vessel}: charging demand misses by {remaining} MWh in its window"
        )));
    }
    let cost = chg.iter().zip(prices).map(|(c, p)| c * p * DT).sum();
    Ok((chg, cost))
}

/// Storage arbitrage LP (independent of the discrete plan).
pub struct EssPlan {
    pub charge: Vec<f64>,
    pub discharge: Vec<f64>,
    pub energy: Vec<f64>,
    pub cost: f64,
}

pub fn solve_ess_arbitrage(task: &Task, prices: &[f64]) -> Result<EssPlan> {
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let (ch0, dch0, e0) = (0, t_n, 2 * t_n);
    let n = 3 * t_n + 1;
    let mut q = vec![0.0; n];
    for t in 0..t_n {
        q[ch0 + t] = prices[t];
        q[dch0 + t] = -prices[t];
    }
    let mut a = SparseMat::builder(n);
    let mut b = Vec::new();
    let mut cones = Vec::new();
    for t in 0..t_n {
        a.push_row(&[
            (e0 + t + 1, 1.0),
            (e0 + t, -1.0),
            (ch0 + t, -DT * sp.ess.eta_ch),
            (dch0 + t, DT / sp.ess.eta_dch),
        ]);
        b.push(0.0);
        cones.push(Cone::Zero);
    }
    a.push_row(&[(e0, 1.0)]);
    b.push(sp.ess.e_init);
    cones.push(Cone::Zero);
    for t in 0..t_n {
        for base in [ch0, dch0] {
            a.push_row(&[(base + t, -1.0)]);
            b.push(0.0);
            cones.push(Cone::Nonneg);
            a.push_row(&[(base + t, 1.0)]);
            b.push(sp.ess.p_max);
            cones.push(Cone::Nonneg);
        }
    }
    for t in 1..=t_n {
        a.push_row(&[(e0 + t, -1.0)]);
        b.push(-sp.ess.e_min);
        cones.push(Cone::Nonneg);
        a.push_row(&[(e0 + t, 1.0)]);
        b.push(sp.ess.e_max);
        cones.push(Cone::Nonneg);
    }
    a.push_row(&[(e0 + t_n, -1.0)]);
    b.push(-sp.ess.e_init);
    cones.push(Cone::Nonneg);

    let prog = ConicProgram {
        n,
        tikhonov: 0.0,
        q,
        a: a.finish(),
        b,
        cones,
        obj_const: 0.0,
        param_dim: 0,
        maps: ParamMaps::default(),
    };
    let pt = solve_with(&prog, 0.0, &qp_layer::SolverOptions::robust())
        .map_err(|e| SchedError::Continuous(format!("storage arbitrage: {e}")))?;
    Ok(EssPlan {
        charge: pt.x[ch0..ch0 + t_n].to_vec(),
        discharge: pt.x[dch0..dch0 + t_n].to_vec(),
        energy: pt.x[e0..e0 + t_n + 1].to_vec(),
        cost: pt.objective,
    })
}

/// Full plan cost under the bid-equals-consumption optimality argument.
/// With `exact_cranes = false` a greedy allocation is tried first and the
/// exact transportation solver is the fallback, so feasibility never depends
/// on the fast path.
pub fn plan_cost(
    task: &Task,
    windows: &[Window],
    prices: &[f64],
    net_load: &[f64],
    ess_cost: f64,
    exact_cranes: bool,
) -> Result<f64> {
    let alloc = if exact_cranes {
        allocate_cranes(task, windows, prices, true)?
    } else {
        match allocate_cranes(task, windows, prices, false) {
            Ok(a) => a,
            Err(_) => allocate_cranes(task, windows, prices, true)?,
        }
    };
    let mut cost = ess_cost + alloc.crane_cost;
    for (t, (&p, &nl)) in prices.iter().zip(net_load).enumerate() {
        let _ = t;
        cost += p * nl * DT;
    }
    for (j, w) in windows.iter().enumerate() {
        let v = &task.vessels[j];
        for t in w.t_in..=w.t_out() {
            cost += prices[t] * v.base_power * DT;
        }
        let (_, chg_cost) = charge_schedule(task, j, w, prices)?;
        cost += chg_cost;
    }
    Ok(cost)
}

/// Assembles the full solution for a final plan, re-deriving every
/// continuous quantity so the result is self-consistent for validation.
pub fn assemble_solution(
    task: &Task,
    windows: &[Window],
    prices: &[f64],
    net_load: &[f64],
    ess: &EssPlan,
) -> Result<ScheduleSolution> {
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_v = windows.len();
    let alloc = allocate_cranes(task, windows, prices, true)?;

    let mut vessel_charge = vec![0.0; n_v * t_n];
    let mut shore = vec![0.0; t_n];
    for (j, w) in windows.iter().enumerate() {
        let (chg, _) = charge_schedule(task, j, w, prices)?;
        for t in 0..t_n {
            vessel_charge[j * t_n + t] = chg[t];
        }
        for t in w.t_in..=w.t_out() {
            shore[t] += task.vessels[j].base_power + chg[t];
        }
    }
    let qc: Vec<f64> = (0..t_n)
        .map(|t| sp.crane_rated_power * (0..n_v).map(|j| alloc.counts[j][t]).sum::<usize>() as f64)
        .collect();
    let consumption: Vec<f64> = (0..t_n)
        .map(|t| shore[t] + qc[t] - ess.discharge[t] + ess.charge[t] + net_load[t])
        .collect();
    let bid = consumption.clone();
    let placements: Vec<Placement> = windows
        .iter()
        .map(|w| Placement { berth_pos: w.berth, t_in: w.t_in, t_out: w.t_out() })
        .collect();
    let discrete = DiscreteAssignment::from_counts(placements, &alloc.counts, t_n, sp.n_cranes);
    let objective = evaluate_cost(&sp.imbalance, &bid, &consumption, prices);
    Ok(ScheduleSolution {
        bid,
        consumption,
        ess_charge: ess.charge.clone(),
        ess_discharge: ess.discharge.clone(),
        quay_crane_power: qc,
        shore_power: shore,
        vessel_charge,
        energy: ess.energy.clone(),
        discrete,
        objective,
        prices: prices.to_vec(),
        net_load: net_load.to_vec(),
    })
}
