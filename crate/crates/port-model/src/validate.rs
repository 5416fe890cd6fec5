//! Full-solution validator. Every constraint family of the scheduling model
//! is checked within a shared tolerance; an empty report certifies the
//! solution, and the recorded magnitudes make violations diagnosable.

use crate::cost::evaluate_cost;
use crate::types::{ScheduleSolution, Task, DT, TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// Stable constraint-family id, e.g. "ess_energy_upper".
    pub constraint: String,
    /// Which row/slot/vessel tripped it.
    pub context: String,
    /// How far outside the feasible set, in the constraint's units.
    pub magnitude: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ViolationReport {
    pub violations: Vec<Violation>,
}

impl ViolationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, constraint: &str, context: String, magnitude: f64) {
        self.violations.push(Violation { constraint: constraint.into(), context, magnitude });
    }
}

pub fn validate_schedule(task: &Task, sol: &ScheduleSolution) -> ViolationReport {
    let mut rep = ViolationReport::default();
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_v = task.n_vessels();
    let d = &sol.discrete;
    let t_last = t_n - 1;

    if d.n_vessels != n_v || d.horizon != t_n || d.n_cranes != sp.n_cranes {
        rep.push("dimensions", format!("{}x{} cranes {}", d.n_vessels, d.horizon, d.n_cranes), 1.0);
        return rep;
    }

    // Berthing pattern: v_jt = 1 exactly on [t_in, t_out].
    for (j, p) in d.placements.iter().enumerate() {
        let v = &task.vessels[j];
        if p.t_in > p.t_out {
            rep.push("vessel_window", format!("vessel {j}: empty interval"), 1.0);
            continue;
        }
        for t in 0..t_n {
            let should = t >= p.t_in && t <= p.t_out;
            if d.berthed_at(j, t) != should {
                rep.push("berthing_pattern", format!("vessel {j} slot {t}"), 1.0);
            }
        }
        if p.t_in < v.arrival_time {
            rep.push("vessel_window", format!("vessel {j}: berthed before arrival"), (v.arrival_time - p.t_in) as f64);
        }
        if p.t_in > v.arrival_time + v.max_wait {
            rep.push("max_waiting", format!("vessel {j}"), (p.t_in - v.arrival_time - v.max_wait) as f64);
        }
        let dep = v.max_leave_time.min(t_last);
        if p.t_out > dep {
            rep.push("departure_deadline", format!("vessel {j}"), (p.t_out - dep) as f64);
        }
        let slots = p.t_out - p.t_in + 1;
        let s_min = v.min_service_slots(sp.crane_efficiency);
        let s_max = v.max_service_slots(sp.crane_efficiency);
        if slots < s_min {
            rep.push("service_duration", format!("vessel {j}: too short"), (s_min - slots) as f64);
        }
        if slots > s_max {
            rep.push("service_duration", format!("vessel {j}: too long"), (slots - s_max) as f64);
        }
        // Berth bounds.
        if p.berth_pos < -TOL {
            rep.push("berth_bounds", format!("vessel {j}"), -p.berth_pos);
        }
        if p.berth_pos + v.length > sp.berth_length + TOL {
            rep.push("berth_bounds", format!("vessel {j}"), p.berth_pos + v.length - sp.berth_length);
        }
    }

    // Spatial-temporal rectangle disjointness.
    for i in 0..n_v {
        for j in (i + 1)..n_v {
            let (pi, pj) = (&d.placements[i], &d.placements[j]);
            let time_overlap = pi.t_in <= pj.t_out && pj.t_in <= pi.t_out;
            if !time_overlap {
                continue;
            }
            let (li, lj) = (task.vessels[i].length, task.vessels[j].length);
            let space_gap = (pj.berth_pos - (pi.berth_pos + li)).max(pi.berth_pos - (pj.berth_pos + lj));
            if space_gap < -TOL {
                rep.push("berth_overlap", format!("vessels {i} and {j}"), -space_gap);
            }
        }
    }

    // Crane assignment: binary exclusivity, bounds, contiguity and work.
    for t in 0..t_n {
        let mut total = 0usize;
        for k in 0..sp.n_cranes {
            let served: Vec<usize> = (0..n_v).filter(|&j| d.crane_at(k, j, t)).collect();
            if served.len() > 1 {
                rep.push("crane_exclusivity", format!("crane {k} slot {t}"), served.len() as f64 - 1.0);
            }
        }
        for j in 0..n_v {
            let count = d.crane_count(j, t);
            total += count;
            let v = &task.vessels[j];
            if d.berthed_at(j, t) {
                if count < v.min_qc {
                    rep.push("crane_count_bounds", format!("vessel {j} slot {t}: below min"), (v.min_qc - count) as f64);
                }
                if count > v.max_qc {
                    rep.push("crane_count_bounds", format!("vessel {j} slot {t}: above max"), (count - v.max_qc) as f64);
                }
            } else if count > 0 {
                rep.push("crane_count_bounds", format!("vessel {j} slot {t}: cranes while unberthed"), count as f64);
            }
            // Contiguous crane indices per vessel-slot.
            let ks: Vec<usize> = (0..sp.n_cranes).filter(|&k| d.crane_at(k, j, t)).collect();
            if let (Some(&lo), Some(&hi)) = (ks.first(), ks.last()) {
                if hi - lo + 1 != ks.len() {
                    rep.push("crane_contiguity", format!("vessel {j} slot {t}"), 1.0);
                }
            }
        }
        if total > sp.n_cranes {
            rep.push("crane_capacity", format!("slot {t}"), (total - sp.n_cranes) as f64);
        }
    }
    // Crane power profile consistency.
    let qc = d.quay_crane_power(sp.crane_rated_power);
    for t in 0..t_n {
        let diff = (qc[t] - sol.quay_crane_power[t]).abs();
        if diff > TOL {
            rep.push("qc_power_definition", format!("slot {t}"), diff);
        }
    }

    // Shore power definition, charging caps and demand.
    for t in 0..t_n {
        let mut ps = 0.0;
        for (j, v) in task.vessels.iter().enumerate() {
            let chg = sol.charge_at(j, t);
            let berthed = d.berthed_at(j, t);
            if chg < -TOL {
                rep.push("charge_power_cap", format!("vessel {j} slot {t}: negative"), -chg);
            }
            let cap = if berthed { v.charge_max } else { 0.0 };
            if chg > cap + TOL {
                rep.push("charge_power_cap", format!("vessel {j} slot {t}"), chg - cap);
            }
            if berthed {
                ps += v.base_power + chg;
            }
        }
        let diff = (ps - sol.shore_power[t]).abs();
        if diff > TOL {
            rep.push("shore_power_definition", format!("slot {t}"), diff);
        }
    }
    for (j, v) in task.vessels.iter().enumerate() {
        if v.charge_demand <= 0.0 {
            continue;
        }
        let delivered: f64 = (0..t_n).map(|t| sol.charge_at(j, t) * DT).sum();
        if delivered + TOL < v.charge_demand {
            rep.push("charge_demand", format!("vessel {j}"), v.charge_demand - delivered);
        }
    }

    // Storage dynamics and bounds.
    if sol.energy.len() != t_n + 1 {
        rep.push("ess_dynamics", "energy trace length".into(), 1.0);
    } else {
        if (sol.energy[0] - sp.ess.e_init).abs() > TOL {
            rep.push("ess_initial_energy", "slot 0".into(), (sol.energy[0] - sp.ess.e_init).abs());
        }
        for t in 0..t_n {
            let expect = sol.energy[t] + DT * (sp.ess.eta_ch * sol.ess_charge[t] - sol.ess_discharge[t] / sp.ess.eta_dch);
            let diff = (sol.energy[t + 1] - expect).abs();
            if diff > TOL {
                rep.push("ess_dynamics", format!("slot {t}"), diff);
            }
        }
        for t in 0..=t_n {
            if sol.energy[t] < sp.ess.e_min - TOL {
                rep.push("ess_energy_lower", format!("slot {t}"), sp.ess.e_min - sol.energy[t]);
            }
            if sol.energy[t] > sp.ess.e_max + TOL {
                rep.push("ess_energy_upper", format!("slot {t}"), sol.energy[t] - sp.ess.e_max);
            }
        }
        if sol.energy[t_n] < sp.ess.e_init - TOL {
            rep.push("ess_terminal_energy", "end of horizon".into(), sp.ess.e_init - sol.energy[t_n]);
        }
    }
    for t in 0..t_n {
        for (name, v) in [("ess_charge", sol.ess_charge[t]), ("ess_discharge", sol.ess_discharge[t])] {
            if v < -TOL {
                rep.push("ess_power_bounds", format!("{name} slot {t}: negative"), -v);
            }
            if v > sp.ess.p_max + TOL {
                rep.push("ess_power_bounds", format!("{name} slot {t}"), v - sp.ess.p_max);
            }
        }
    }

    // Power balance: consumption = shore + cranes - discharge + charge + net load.
    for t in 0..t_n {
        let expect = sol.shore_power[t] + sol.quay_crane_power[t] - sol.ess_discharge[t]
            + sol.ess_charge[t]
            + sol.net_load[t];
        let diff = (sol.consumption[t] - expect).abs();
        if diff > TOL {
            rep.push("power_balance", format!("slot {t}"), diff);
        }
    }

    // Objective consistency with the settlement arithmetic.
    let cost = evaluate_cost(&sp.imbalance, &sol.bid, &sol.consumption, &sol.prices);
    let diff = (cost - sol.objective).abs();
    if diff > TOL * (1.0 + sol.objective.abs()) {
        rep.push("objective_consistency", "total".into(), diff);
    }

    rep
}
