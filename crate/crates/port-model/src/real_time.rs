//! Real-time re-dispatch. The day-ahead stage fixes the bid, the storage
//! plan and the discrete logistics surface; only shore-power charging (and
//! through it the realized consumption) remains free once actual prices and
//! net load are revealed. The result is an LP whose data are affine in
//! eta = [bid, ess_ch, ess_dch, qc_power, berthing].

use crate::conic::{Cone, ConicProgram, ParamMaps, SparseMat};
use crate::day_ahead::{BuildOptions, EtaLayout, DEMAND_MARGIN};
use crate::error::{PortError, Result};
use crate::types::{Task, DT};

#[derive(Debug, Clone)]
pub struct RealTimeVars {
    pub horizon: usize,
    pub consumption: usize,
    pub dev_pos: usize,
    pub dev_neg: usize,
    /// Free charging cells (vessel, slot); cells with a zero cap are pruned.
    pub charge_cells: Vec<(usize, usize)>,
    pub charge_start: usize,
    pub n: usize,
}

#[derive(Debug, Clone)]
pub struct RealTimeLp {
    pub program: ConicProgram,
    pub vars: RealTimeVars,
    pub eta: EtaLayout,
}

/// Day-ahead quantities the real-time stage treats as fixed.
#[derive(Debug, Clone)]
pub struct DayAheadFix {
    pub bid: Vec<f64>,
    pub ess_ch: Vec<f64>,
    pub ess_dch: Vec<f64>,
    pub qc_power: Vec<f64>,
    /// Berthing surface; binary when coming from the discrete scheduler,
    /// relaxed in [0,1] when coming from the surrogate.
    pub berthing: Vec<f64>,
}

pub fn build_real_time(
    task: &Task,
    fix: &DayAheadFix,
    prices: &[f64],
    net_load: &[f64],
    opts: &BuildOptions,
) -> Result<RealTimeLp> {
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_vessels = task.n_vessels();
    for (name, v) in [
        ("bid", &fix.bid),
        ("ess_ch", &fix.ess_ch),
        ("ess_dch", &fix.ess_dch),
        ("qc_power", &fix.qc_power),
    ] {
        if v.len() != t_n {
            return Err(PortError::BadInput(format!("{name} length {} != horizon {t_n}", v.len())));
        }
    }
    if fix.berthing.len() != n_vessels * t_n || prices.len() != t_n || net_load.len() != t_n {
        return Err(PortError::BadInput("real-time input dimensions mismatch".into()));
    }
    let vhat = |j: usize, t: usize| fix.berthing[j * t_n + t].clamp(0.0, 1.0);

    // Charging-demand deliverability under the fixed berthing surface.
    let mut charge_cells = Vec::new();
    for &j in &task.charging_vessels() {
        let cap = task.vessels[j].charge_max;
        let deliverable: f64 = (0..t_n).map(|t| cap * DT * vhat(j, t)).sum();
        if deliverable + DEMAND_MARGIN < task.vessels[j].charge_demand {
            return Err(PortError::ChargeDemandInfeasible {
                vessel: j,
                demand: task.vessels[j].charge_demand,
                deliverable,
            });
        }
        for t in 0..t_n {
            if cap * vhat(j, t) > 0.0 {
                charge_cells.push((j, t));
            }
        }
    }

    let consumption = 0;
    let dev_pos = t_n;
    let dev_neg = 2 * t_n;
    let charge_start = 3 * t_n;
    let n = charge_start + charge_cells.len();
    let vars = RealTimeVars {
        horizon: t_n,
        consumption,
        dev_pos,
        dev_neg,
        charge_cells: charge_cells.clone(),
        charge_start,
        n,
    };

    let eta = EtaLayout {
        blocks: vec![
            ("bid", 0, t_n),
            ("ess_ch", t_n, t_n),
            ("ess_dch", 2 * t_n, t_n),
            ("qc_power", 3 * t_n, t_n),
            ("berthing", 4 * t_n, n_vessels * t_n),
        ],
    };
    let eta_bid = |t: usize| t;
    let eta_ch = |t: usize| t_n + t;
    let eta_dch = |t: usize| 2 * t_n + t;
    let eta_qc = |t: usize| 3 * t_n + t;
    let eta_v = |j: usize, t: usize| 4 * t_n + j * t_n + t;

    let rho_pos = sp.imbalance.rho_pos;
    let rho_neg = sp.imbalance.rho_neg;
    let mut q = vec![0.0; n];
    for t in 0..t_n {
        q[dev_pos + t] = rho_pos * prices[t];
        q[dev_neg + t] = -rho_neg * prices[t];
    }
    let obj_const: f64 = prices.iter().zip(&fix.bid).map(|(p, b)| p * b).sum();

    let mut maps = ParamMaps::default();
    let mut a = SparseMat::builder(n);
    let mut b = Vec::new();
    let mut cones = Vec::new();

    // Split rows: dev_pos - dev_neg - consumption = -bid.
    for t in 0..t_n {
        let row = a.push_row(&[(dev_pos + t, 1.0), (dev_neg + t, -1.0), (consumption + t, -1.0)]);
        b.push(-fix.bid[t]);
        maps.b.push((eta_bid(t) as u32, row as u32, -1.0));
        cones.push(Cone::Zero);
    }
    // Balance rows against the realized net load:
    //   consumption - sum vhat*chg = qc + net_load + sum vhat*base - dch + ch.
    let cell_index: Vec<usize> = (0..charge_cells.len()).collect();
    for t in 0..t_n {
        let mut terms = vec![(consumption + t, 1.0)];
        for (&ci, &(j, tt)) in cell_index.iter().zip(&charge_cells) {
            if tt == t {
                terms.push((charge_start + ci, -vhat(j, t)));
            }
        }
        let row = a.push_row_structural(&terms);
        for (&ci, &(j, tt)) in cell_index.iter().zip(&charge_cells) {
            if tt == t {
                maps.a.push((eta_v(j, t) as u32, row as u32, (charge_start + ci) as u32, -1.0));
            }
        }
        let mut rhs = fix.qc_power[t] + net_load[t] - fix.ess_dch[t] + fix.ess_ch[t];
        maps.b.push((eta_qc(t) as u32, row as u32, 1.0));
        maps.b.push((eta_dch(t) as u32, row as u32, -1.0));
        maps.b.push((eta_ch(t) as u32, row as u32, 1.0));
        for (j, v) in task.vessels.iter().enumerate() {
            rhs += v.base_power * vhat(j, t);
            maps.b.push((eta_v(j, t) as u32, row as u32, v.base_power));
        }
        b.push(rhs);
        cones.push(Cone::Zero);
    }
    // Sign constraints and consumption bounds.
    for t in 0..t_n {
        a.push_row(&[(dev_pos + t, -1.0)]);
        b.push(0.0);
        cones.push(Cone::Nonneg);
        a.push_row(&[(dev_neg + t, -1.0)]);
        b.push(0.0);
        cones.push(Cone::Nonneg);
        a.push_row(&[(consumption + t, 1.0)]);
        b.push(opts.power_bound);
        cones.push(Cone::Nonneg);
        a.push_row(&[(consumption + t, -1.0)]);
        b.push(opts.power_bound);
        cones.push(Cone::Nonneg);
    }
    // Charging bounds and demand per charging vessel.
    for (ci, &(j, t)) in charge_cells.iter().enumerate() {
        let col = charge_start + ci;
        a.push_row(&[(col, -1.0)]);
        b.push(0.0);
        cones.push(Cone::Nonneg);
        let row = a.push_row(&[(col, 1.0)]);
        b.push(task.vessels[j].charge_max * vhat(j, t));
        maps.b.push((eta_v(j, t) as u32, row as u32, task.vessels[j].charge_max));
        cones.push(Cone::Nonneg);
    }
    for &j in &task.charging_vessels() {
        let terms: Vec<(usize, f64)> = charge_cells
            .iter()
            .enumerate()
            .filter(|(_, &(jj, _))| jj == j)
            .map(|(ci, _)| (charge_start + ci, -DT))
            .collect();
        if terms.is_empty() {
            continue;
        }
        a.push_row(&terms);
        b.push(-(task.vessels[j].charge_demand - DEMAND_MARGIN));
        cones.push(Cone::Nonneg);
    }

    let program = ConicProgram {
        n,
        tikhonov: opts.tikhonov,
        q,
        a: a.finish(),
        b,
        cones,
        obj_const,
        param_dim: eta.dim(),
        maps,
    };
    Ok(RealTimeLp { program, vars, eta })
}
