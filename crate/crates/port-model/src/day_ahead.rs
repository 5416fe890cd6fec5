//! Day-ahead bidding problem.
//!
//! With the discrete logistics surface fixed to surrogate values
//! (crane power profile `qc_hat` and a relaxed berthing matrix `v_hat` in
//! [0,1]), the remaining co-optimization of the bid, imbalance split, storage
//! and vessel charging is a conic QP whose data are affine in
//! eta = [prices, net_load, qc_hat, v_hat]. Without the fix, the full
//! mixed-integer description is produced instead (see `mixed_integer`).

use crate::conic::{Cone, ConicProgram, ParamMaps, SparseMat};
use crate::error::{PortError, Result};
use crate::types::{Task, DT};

/// Feasibility margin on charging-demand rows. Surrogate berthing matrices
/// are convex blends of feasible binary plans; the blend meets demand up to
/// the weight-normalization epsilon, so the row is relaxed by this margin.
pub const DEMAND_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Tikhonov weight on the quadratic term.
    pub tikhonov: f64,
    /// Static bound on |bid| and |consumption| per slot, MW. Must dominate
    /// any plausible net load; it exists to keep the problem bounded and the
    /// reduced Newton systems nonsingular, and is sized to stay inactive.
    pub power_bound: f64,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { tikhonov: 0.0, power_bound: 400.0 }
    }
}

/// Variable spans of the convexified day-ahead program.
#[derive(Debug, Clone)]
pub struct DayAheadVars {
    pub horizon: usize,
    pub bid: usize,
    pub consumption: usize,
    pub dev_pos: usize,
    pub dev_neg: usize,
    pub ess_ch: usize,
    pub ess_dch: usize,
    pub energy: usize,
    /// Charging-capable vessels, in task order, with their column blocks.
    pub charge_vessels: Vec<usize>,
    pub charge_start: usize,
    pub n: usize,
}

impl DayAheadVars {
    pub fn idx_charge(&self, slot_in_list: usize, t: usize) -> usize {
        self.charge_start + slot_in_list * self.horizon + t
    }
}

/// eta spans shared by both stages: callers concatenate the blocks in this
/// order when differentiating.
#[derive(Debug, Clone)]
pub struct EtaLayout {
    pub blocks: Vec<(&'static str, usize, usize)>,
}

impl EtaLayout {
    pub fn dim(&self) -> usize {
        self.blocks.last().map(|&(_, s, l)| s + l).unwrap_or(0)
    }

    pub fn span(&self, name: &str) -> Option<(usize, usize)> {
        self.blocks.iter().find(|&&(n, _, _)| n == name).map(|&(_, s, l)| (s, l))
    }
}

#[derive(Debug, Clone)]
pub struct ConvexDayAhead {
    pub program: ConicProgram,
    pub vars: DayAheadVars,
    pub eta: EtaLayout,
}

/// Surrogate fix for the discrete surface.
#[derive(Debug, Clone)]
pub struct SurrogateFix {
    /// Crane power profile, MW per slot.
    pub qc_power: Vec<f64>,
    /// Relaxed berthing matrix in [0,1], row-major vessels x slots.
    pub berthing: Vec<f64>,
}

fn check_lengths(task: &Task, prices: &[f64], net_load: &[f64]) -> Result<()> {
    let t = task.horizon();
    if prices.len() != t || net_load.len() != t {
        return Err(PortError::BadInput(format!(
            "forecast length mismatch: prices {}, net load {}, horizon {t}",
            prices.len(),
            net_load.len()
        )));
    }
    Ok(())
}

/// Static feasibility screen run before any solve: per-vessel windows, berth
/// fit, and slots where mandatorily-present vessels exceed crane or berth
/// capacity.
pub fn check_static_feasibility(task: &Task) -> Result<()> {
    let sp = &task.static_params;
    let t_last = sp.horizon - 1;
    let mut reasons = Vec::new();
    for (j, v) in task.vessels.iter().enumerate() {
        let s_min = v.min_service_slots(sp.crane_efficiency);
        if v.length > sp.berth_length {
            reasons.push(format!("vessel {j}: length {} exceeds berth {}", v.length, sp.berth_length));
        }
        if v.arrival_time + s_min - 1 > v.max_leave_time.min(t_last) {
            reasons.push(format!(
                "vessel {j}: earliest completion {} after deadline {}",
                v.arrival_time + s_min - 1,
                v.max_leave_time.min(t_last)
            ));
        }
        if v.charge_demand > 0.0 {
            let s_max = v.max_service_slots(sp.crane_efficiency);
            let window = (v.max_leave_time.min(t_last) + 1).saturating_sub(v.arrival_time);
            let deliverable = v.charge_max * DT * s_max.min(window) as f64;
            if deliverable + 1e-9 < v.charge_demand {
                reasons.push(format!(
                    "vessel {j}: charging demand {} exceeds deliverable {deliverable}",
                    v.charge_demand
                ));
            }
        }
    }
    // Mandatory-presence interval: every admissible berthing of vessel j
    // covers [arr + wait, arr + s_min - 1] when that interval is nonempty.
    for t in 0..sp.horizon {
        let mut cranes_forced = 0usize;
        let mut length_forced = 0.0;
        for v in &task.vessels {
            let s_min = v.min_service_slots(sp.crane_efficiency);
            let lo = v.arrival_time + v.max_wait;
            let hi = v.arrival_time + s_min - 1;
            if lo <= hi && t >= lo && t <= hi {
                cranes_forced += v.min_qc;
                length_forced += v.length;
            }
        }
        if cranes_forced > sp.n_cranes {
            reasons.push(format!("slot {t}: forced crane demand {cranes_forced} exceeds {}", sp.n_cranes));
        }
        if length_forced > sp.berth_length {
            reasons.push(format!("slot {t}: forced berth occupancy {length_forced} exceeds {}", sp.berth_length));
        }
    }
    if reasons.is_empty() {
        Ok(())
    } else {
        Err(PortError::StaticInfeasible { reasons })
    }
}

/// Builds the surrogate-convexified day-ahead program.
pub fn build_day_ahead_convex(
    task: &Task,
    prices: &[f64],
    net_load: &[f64],
    fix: &SurrogateFix,
    opts: &BuildOptions,
) -> Result<ConvexDayAhead> {
    check_lengths(task, prices, net_load)?;
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_vessels = task.n_vessels();
    if fix.qc_power.len() != t_n || fix.berthing.len() != n_vessels * t_n {
        return Err(PortError::BadInput("surrogate fix has wrong dimensions".into()));
    }
    for &v in &fix.berthing {
        if !(-1e-9..=1.0 + 1e-9).contains(&v) {
            return Err(PortError::BadInput(format!("relaxed berthing entry {v} outside [0,1]")));
        }
    }
    if net_load.iter().any(|p| p.abs() > 0.5 * opts.power_bound) {
        return Err(PortError::BadInput(
            "net load exceeds half the static power bound; raise BuildOptions::power_bound".into(),
        ));
    }

    let vhat = |j: usize, t: usize| fix.berthing[j * t_n + t].clamp(0.0, 1.0);
    let charge_vessels = task.charging_vessels();

    let bid = 0;
    let consumption = t_n;
    let dev_pos = 2 * t_n;
    let dev_neg = 3 * t_n;
    let ess_ch = 4 * t_n;
    let ess_dch = 5 * t_n;
    let energy = 6 * t_n;
    let charge_start = 7 * t_n + 1;
    let n = charge_start + charge_vessels.len() * t_n;
    let vars = DayAheadVars {
        horizon: t_n,
        bid,
        consumption,
        dev_pos,
        dev_neg,
        ess_ch,
        ess_dch,
        energy,
        charge_vessels: charge_vessels.clone(),
        charge_start,
        n,
    };

    let eta = EtaLayout {
        blocks: vec![
            ("prices", 0, t_n),
            ("net_load", t_n, t_n),
            ("qc_power", 2 * t_n, t_n),
            ("berthing", 3 * t_n, n_vessels * t_n),
        ],
    };
    let eta_price = |t: usize| t;
    let eta_load = |t: usize| t_n + t;
    let eta_qc = |t: usize| 2 * t_n + t;
    let eta_v = |j: usize, t: usize| 3 * t_n + j * t_n + t;

    let mut q = vec![0.0; n];
    let mut maps = ParamMaps::default();
    let rho_pos = sp.imbalance.rho_pos;
    let rho_neg = sp.imbalance.rho_neg;
    for t in 0..t_n {
        q[bid + t] = prices[t];
        maps.q.push((eta_price(t) as u32, (bid + t) as u32, 1.0));
        q[dev_pos + t] = rho_pos * prices[t];
        maps.q.push((eta_price(t) as u32, (dev_pos + t) as u32, rho_pos));
        q[dev_neg + t] = -rho_neg * prices[t];
        maps.q.push((eta_price(t) as u32, (dev_neg + t) as u32, -rho_neg));
    }

    let mut a = SparseMat::builder(n);
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // Deviation split: dev_pos - dev_neg - consumption + bid = 0.
    for t in 0..t_n {
        a.push_row(&[
            (dev_pos + t, 1.0),
            (dev_neg + t, -1.0),
            (consumption + t, -1.0),
            (bid + t, 1.0),
        ]);
        b.push(0.0);
        cones.push(Cone::Zero);
    }
    // Power balance with the shore-power surface expanded:
    //   consumption - sum_j vhat*chg + dch - ch = qc + net_load + sum_j vhat*base
    for t in 0..t_n {
        let mut terms = vec![(consumption + t, 1.0), (ess_dch + t, 1.0), (ess_ch + t, -1.0)];
        for (slot, &j) in charge_vessels.iter().enumerate() {
            terms.push((vars.idx_charge(slot, t), -vhat(j, t)));
        }
        let row = a.push_row_structural(&terms);
        for (slot, &j) in charge_vessels.iter().enumerate() {
            maps.a.push((
                eta_v(j, t) as u32,
                row as u32,
                vars.idx_charge(slot, t) as u32,
                -1.0,
            ));
        }
        let mut rhs = fix.qc_power[t] + net_load[t];
        maps.b.push((eta_qc(t) as u32, row as u32, 1.0));
        maps.b.push((eta_load(t) as u32, row as u32, 1.0));
        for (j, v) in task.vessels.iter().enumerate() {
            rhs += v.base_power * vhat(j, t);
            maps.b.push((eta_v(j, t) as u32, row as u32, v.base_power));
        }
        b.push(rhs);
        cones.push(Cone::Zero);
    }
    // Storage dynamics: e_{t+1} - e_t - dt*eta_ch*ch + dt/eta_dch*dch = 0.
    for t in 0..t_n {
        a.push_row(&[
            (energy + t + 1, 1.0),
            (energy + t, -1.0),
            (ess_ch + t, -DT * sp.ess.eta_ch),
            (ess_dch + t, DT / sp.ess.eta_dch),
        ]);
        b.push(0.0);
        cones.push(Cone::Zero);
    }
    // Initial stored energy.
    a.push_row(&[(energy, 1.0)]);
    b.push(sp.ess.e_init);
    cones.push(Cone::Zero);

    // Nonnegative split variables.
    for t in 0..t_n {
        a.push_row(&[(dev_pos + t, -1.0)]);
        b.push(0.0);
        cones.push(Cone::Nonneg);
        a.push_row(&[(dev_neg + t, -1.0)]);
        b.push(0.0);
        cones.push(Cone::Nonneg);
    }
    // Storage power bounds.
    for t in 0..t_n {
        for base in [ess_ch, ess_dch] {
            a.push_row(&[(base + t, -1.0)]);
            b.push(0.0);
            cones.push(Cone::Nonneg);
            a.push_row(&[(base + t, 1.0)]);
            b.push(sp.ess.p_max);
            cones.push(Cone::Nonneg);
        }
    }
    // Energy bounds for t = 1..=T plus the cyclic terminal condition.
    for t in 1..=t_n {
        a.push_row(&[(energy + t, -1.0)]);
        b.push(-sp.ess.e_min);
        cones.push(Cone::Nonneg);
        a.push_row(&[(energy + t, 1.0)]);
        b.push(sp.ess.e_max);
        cones.push(Cone::Nonneg);
    }
    a.push_row(&[(energy + t_n, -1.0)]);
    b.push(-sp.ess.e_init);
    cones.push(Cone::Nonneg);

    // Static power bounds on bid and consumption.
    for base in [bid, consumption] {
        for t in 0..t_n {
            a.push_row(&[(base + t, 1.0)]);
            b.push(opts.power_bound);
            cones.push(Cone::Nonneg);
            a.push_row(&[(base + t, -1.0)]);
            b.push(opts.power_bound);
            cones.push(Cone::Nonneg);
        }
    }
    // Vessel charging: bounds and demand.
    for (slot, &j) in charge_vessels.iter().enumerate() {
        let cap = task.vessels[j].charge_max;
        for t in 0..t_n {
            let col = vars.idx_charge(slot, t);
            a.push_row(&[(col, -1.0)]);
            b.push(0.0);
            cones.push(Cone::Nonneg);
            let row = a.push_row(&[(col, 1.0)]);
            b.push(cap * vhat(j, t));
            maps.b.push((eta_v(j, t) as u32, row as u32, cap));
            cones.push(Cone::Nonneg);
        }
        let terms: Vec<(usize, f64)> =
            (0..t_n).map(|t| (vars.idx_charge(slot, t), -DT)).collect();
        a.push_row(&terms);
        b.push(-(task.vessels[j].charge_demand - DEMAND_MARGIN));
        cones.push(Cone::Nonneg);

        // Deliverability under the relaxed berthing.
        let deliverable: f64 = (0..t_n).map(|t| cap * DT * vhat(j, t)).sum();
        if deliverable + DEMAND_MARGIN < task.vessels[j].charge_demand {
            return Err(PortError::ChargeDemandInfeasible {
                vessel: j,
                demand: task.vessels[j].charge_demand,
                deliverable,
            });
        }
    }

    let a = a.finish();
    let program = ConicProgram {
        n,
        tikhonov: opts.tikhonov,
        q,
        a,
        b,
        cones,
        obj_const: 0.0,
        param_dim: eta.dim(),
        maps,
    };
    Ok(ConvexDayAhead { program, vars, eta })
}
