//! Full mixed-integer description of the day-ahead problem, with the
//! disjunctive berth/time constraints linearized by big-M rows (M equal to
//! the horizon for time-indexed rows and to the berth length for spatial
//! rows). This is a declarative artifact: the heuristic scheduler works on
//! structured data instead, but the row list pins down the exact model and
//! is checked against a hand enumeration in tests.

use crate::error::Result;
use crate::types::Task;

#[derive(Debug, Clone, PartialEq)]
pub enum MiVar {
    /// v_{j,t}: vessel berthed in slot t (binary).
    Berthed { vessel: usize, t: usize },
    /// s_{j,t}: berthing run of vessel j starts at slot t (binary).
    StartsAt { vessel: usize, t: usize },
    /// c_{k,j,t}: crane k serves vessel j in slot t (binary).
    CraneAssign { crane: usize, vessel: usize, t: usize },
    /// Berth position on the 1 m grid (integer).
    BerthPos { vessel: usize },
    /// Spatial disjunction: vessel i entirely left of vessel j (binary).
    LeftOf { i: usize, j: usize },
    /// Temporal disjunction: vessel i departs before vessel j berths (binary).
    Before { i: usize, j: usize },
    Bid { t: usize },
    Consumption { t: usize },
    DevPos { t: usize },
    DevNeg { t: usize },
    EssCh { t: usize },
    EssDch { t: usize },
    Energy { t: usize },
    Charge { vessel: usize, t: usize },
    QcPower { t: usize },
    ShorePower { t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

#[derive(Debug, Clone)]
pub struct MiVarDef {
    pub var: MiVar,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct MiRow {
    /// Stable constraint-family label shared with the validator.
    pub label: String,
    pub terms: Vec<(usize, f64)>,
    pub rel: Rel,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct MixedIntegerDescription {
    pub vars: Vec<MiVarDef>,
    pub rows: Vec<MiRow>,
    /// Linear objective over variable indices (minimized).
    pub objective: Vec<(usize, f64)>,
}

impl MixedIntegerDescription {
    pub fn var_index(&self, var: &MiVar) -> Option<usize> {
        self.vars.iter().position(|d| &d.var == var)
    }

    pub fn rows_labeled(&self, label: &str) -> Vec<&MiRow> {
        self.rows.iter().filter(|r| r.label == label).collect()
    }
}

pub fn build_day_ahead_mixed_integer(
    task: &Task,
    prices: &[f64],
    net_load: &[f64],
) -> Result<MixedIntegerDescription> {
    crate::day_ahead::check_static_feasibility(task)?;
    let sp = &task.static_params;
    let t_n = sp.horizon;
    let n_v = task.n_vessels();
    let n_k = sp.n_cranes;
    let big_m_time = t_n as f64;
    let big_m_space = sp.berth_length;
    let t_last = t_n - 1;

    let mut vars: Vec<MiVarDef> = Vec::new();
    let push_var = |var: MiVar, kind: VarKind, lower: f64, upper: f64, vars: &mut Vec<MiVarDef>| -> usize {
        vars.push(MiVarDef { var, kind, lower, upper });
        vars.len() - 1
    };

    let mut v_idx = vec![vec![0usize; t_n]; n_v];
    let mut s_idx = vec![vec![0usize; t_n]; n_v];
    for j in 0..n_v {
        for t in 0..t_n {
            v_idx[j][t] = push_var(MiVar::Berthed { vessel: j, t }, VarKind::Binary, 0.0, 1.0, &mut vars);
        }
        for t in 0..t_n {
            s_idx[j][t] = push_var(MiVar::StartsAt { vessel: j, t }, VarKind::Binary, 0.0, 1.0, &mut vars);
        }
    }
    let mut c_idx = vec![vec![vec![0usize; t_n]; n_v]; n_k];
    for k in 0..n_k {
        for j in 0..n_v {
            for t in 0..t_n {
                c_idx[k][j][t] =
                    push_var(MiVar::CraneAssign { crane: k, vessel: j, t }, VarKind::Binary, 0.0, 1.0, &mut vars);
            }
        }
    }
    let mut b_idx = vec![0usize; n_v];
    for j in 0..n_v {
        b_idx[j] = push_var(
            MiVar::BerthPos { vessel: j },
            VarKind::Integer,
            0.0,
            sp.berth_length - task.vessels[j].length,
            &mut vars,
        );
    }
    let mut left_idx = vec![vec![usize::MAX; n_v]; n_v];
    let mut before_idx = vec![vec![usize::MAX; n_v]; n_v];
    for i in 0..n_v {
        for j in 0..n_v {
            if i == j {
                continue;
            }
            left_idx[i][j] = push_var(MiVar::LeftOf { i, j }, VarKind::Binary, 0.0, 1.0, &mut vars);
            before_idx[i][j] = push_var(MiVar::Before { i, j }, VarKind::Binary, 0.0, 1.0, &mut vars);
        }
    }
    let bid: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::Bid { t }, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, &mut vars)).collect();
    let cons: Vec<usize> = (0..t_n)
        .map(|t| push_var(MiVar::Consumption { t }, VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY, &mut vars))
        .collect();
    let dpos: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::DevPos { t }, VarKind::Continuous, 0.0, f64::INFINITY, &mut vars)).collect();
    let dneg: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::DevNeg { t }, VarKind::Continuous, 0.0, f64::INFINITY, &mut vars)).collect();
    let ch: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::EssCh { t }, VarKind::Continuous, 0.0, sp.ess.p_max, &mut vars)).collect();
    let dch: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::EssDch { t }, VarKind::Continuous, 0.0, sp.ess.p_max, &mut vars)).collect();
    let energy: Vec<usize> = (0..=t_n)
        .map(|t| push_var(MiVar::Energy { t }, VarKind::Continuous, sp.ess.e_min, sp.ess.e_max, &mut vars))
        .collect();
    let charging = task.charging_vessels();
    let mut chg_idx = vec![vec![usize::MAX; t_n]; n_v];
    for &j in &charging {
        for t in 0..t_n {
            chg_idx[j][t] = push_var(
                MiVar::Charge { vessel: j, t },
                VarKind::Continuous,
                0.0,
                task.vessels[j].charge_max,
                &mut vars,
            );
        }
    }
    let qc: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::QcPower { t }, VarKind::Continuous, 0.0, f64::INFINITY, &mut vars)).collect();
    let ps: Vec<usize> =
        (0..t_n).map(|t| push_var(MiVar::ShorePower { t }, VarKind::Continuous, 0.0, f64::INFINITY, &mut vars)).collect();

    let mut rows: Vec<MiRow> = Vec::new();
    let row = |label: &str, terms: Vec<(usize, f64)>, rel: Rel, rhs: f64, rows: &mut Vec<MiRow>| {
        rows.push(MiRow { label: label.into(), terms, rel, rhs });
    };

    for (j, v) in task.vessels.iter().enumerate() {
        // Outside the admissible window the berthing indicator is fixed to 0.
        for t in 0..v.arrival_time {
            row("vessel_window", vec![(v_idx[j][t], 1.0)], Rel::Eq, 0.0, &mut rows);
        }
        for t in (v.max_leave_time.min(t_last) + 1)..t_n {
            row("vessel_window", vec![(v_idx[j][t], 1.0)], Rel::Eq, 0.0, &mut rows);
        }
        // Exactly one berthing run.
        row(
            "single_run",
            (0..t_n).map(|t| (s_idx[j][t], 1.0)).collect(),
            Rel::Eq,
            1.0,
            &mut rows,
        );
        // Run-start detection keeps the berthed slots contiguous.
        row("run_start", vec![(v_idx[j][0], 1.0), (s_idx[j][0], -1.0)], Rel::Le, 0.0, &mut rows);
        for t in 1..t_n {
            row(
                "run_start",
                vec![(v_idx[j][t], 1.0), (v_idx[j][t - 1], -1.0), (s_idx[j][t], -1.0)],
                Rel::Le,
                0.0,
                &mut rows,
            );
        }
        // Start slot within [arrival, arrival + max wait].
        let start_time: Vec<(usize, f64)> = (0..t_n).map(|t| (s_idx[j][t], t as f64)).collect();
        row("max_waiting", start_time.clone(), Rel::Ge, v.arrival_time as f64, &mut rows);
        row("max_waiting", start_time, Rel::Le, (v.arrival_time + v.max_wait) as f64, &mut rows);
        // Service duration window.
        let dur: Vec<(usize, f64)> = (0..t_n).map(|t| (v_idx[j][t], 1.0)).collect();
        row("service_duration", dur.clone(), Rel::Ge, v.min_service_slots(sp.crane_efficiency) as f64, &mut rows);
        row("service_duration", dur, Rel::Le, v.max_service_slots(sp.crane_efficiency) as f64, &mut rows);
        // Crane-count bounds while berthed.
        for t in 0..t_n {
            let mut lo: Vec<(usize, f64)> = (0..n_k).map(|k| (c_idx[k][j][t], 1.0)).collect();
            lo.push((v_idx[j][t], -(v.min_qc as f64)));
            row("crane_count_bounds", lo, Rel::Ge, 0.0, &mut rows);
            let mut hi: Vec<(usize, f64)> = (0..n_k).map(|k| (c_idx[k][j][t], 1.0)).collect();
            hi.push((v_idx[j][t], -(v.max_qc as f64)));
            row("crane_count_bounds", hi, Rel::Le, 0.0, &mut rows);
        }
    }

    // One vessel per crane-slot.
    for k in 0..n_k {
        for t in 0..t_n {
            row(
                "crane_exclusivity",
                (0..n_v).map(|j| (c_idx[k][j][t], 1.0)).collect(),
                Rel::Le,
                1.0,
                &mut rows,
            );
        }
    }
    // Crane blocks contiguous in the crane index.
    for k in 1..n_k.saturating_sub(1) {
        for j in 0..n_v {
            for t in 0..t_n {
                row(
                    "crane_contiguity",
                    vec![(c_idx[k + 1][j][t], 1.0), (c_idx[k - 1][j][t], 1.0), (c_idx[k][j][t], -1.0)],
                    Rel::Le,
                    1.0,
                    &mut rows,
                );
            }
        }
    }

    // Rectangle disjunction: space-left, space-right, time-before or
    // time-after must hold for every pair.
    for i in 0..n_v {
        for j in (i + 1)..n_v {
            row(
                "berth_overlap",
                vec![
                    (b_idx[i], 1.0),
                    (b_idx[j], -1.0),
                    (left_idx[i][j], big_m_space),
                ],
                Rel::Le,
                big_m_space - task.vessels[i].length,
                &mut rows,
            );
            row(
                "berth_overlap",
                vec![
                    (b_idx[j], 1.0),
                    (b_idx[i], -1.0),
                    (left_idx[j][i], big_m_space),
                ],
                Rel::Le,
                big_m_space - task.vessels[j].length,
                &mut rows,
            );
            // t_out_i + 1 <= t_in_j when Before{i,j}: start_i + dur_i - start_j <= M(1 - tau).
            for (a, bb) in [(i, j), (j, i)] {
                let mut terms: Vec<(usize, f64)> = (0..t_n).map(|t| (s_idx[a][t], t as f64)).collect();
                terms.extend((0..t_n).map(|t| (v_idx[a][t], 1.0)));
                terms.extend((0..t_n).map(|t| (s_idx[bb][t], -(t as f64))));
                terms.push((before_idx[a][bb], big_m_time));
                row("berth_overlap", terms, Rel::Le, big_m_time, &mut rows);
            }
            row(
                "berth_overlap",
                vec![
                    (left_idx[i][j], 1.0),
                    (left_idx[j][i], 1.0),
                    (before_idx[i][j], 1.0),
                    (before_idx[j][i], 1.0),
                ],
                Rel::Ge,
                1.0,
                &mut rows,
            );
        }
    }

    // Crane power and shore power definitions.
    for t in 0..t_n {
        let mut terms = vec![(qc[t], 1.0)];
        for k in 0..n_k {
            for j in 0..n_v {
                terms.push((c_idx[k][j][t], -sp.crane_rated_power));
            }
        }
        row("qc_power_definition", terms, Rel::Eq, 0.0, &mut rows);

        let mut terms = vec![(ps[t], 1.0)];
        for (j, v) in task.vessels.iter().enumerate() {
            terms.push((v_idx[j][t], -v.base_power));
            if chg_idx[j][t] != usize::MAX {
                terms.push((chg_idx[j][t], -1.0));
            }
        }
        row("shore_power_definition", terms, Rel::Eq, 0.0, &mut rows);
    }
    // Charging caps tied to berthing, and the per-vessel energy demand.
    for &j in &charging {
        let cap = task.vessels[j].charge_max;
        for t in 0..t_n {
            row(
                "charge_power_cap",
                vec![(chg_idx[j][t], 1.0), (v_idx[j][t], -cap)],
                Rel::Le,
                0.0,
                &mut rows,
            );
        }
        row(
            "charge_demand",
            (0..t_n).map(|t| (chg_idx[j][t], 1.0)).collect(),
            Rel::Ge,
            task.vessels[j].charge_demand,
            &mut rows,
        );
    }
    // Storage dynamics, initial and terminal energy.
    for t in 0..t_n {
        row(
            "ess_dynamics",
            vec![
                (energy[t + 1], 1.0),
                (energy[t], -1.0),
                (ch[t], -sp.ess.eta_ch),
                (dch[t], 1.0 / sp.ess.eta_dch),
            ],
            Rel::Eq,
            0.0,
            &mut rows,
        );
    }
    row("ess_initial_energy", vec![(energy[0], 1.0)], Rel::Eq, sp.ess.e_init, &mut rows);
    row("ess_terminal_energy", vec![(energy[t_n], 1.0)], Rel::Ge, sp.ess.e_init, &mut rows);
    // Deviation split and power balance.
    for t in 0..t_n {
        row(
            "deviation_split",
            vec![(dpos[t], 1.0), (dneg[t], -1.0), (cons[t], -1.0), (bid[t], 1.0)],
            Rel::Eq,
            0.0,
            &mut rows,
        );
        row(
            "power_balance",
            vec![(cons[t], 1.0), (ps[t], -1.0), (qc[t], -1.0), (dch[t], 1.0), (ch[t], -1.0)],
            Rel::Eq,
            net_load[t],
            &mut rows,
        );
    }

    let mut objective = Vec::new();
    for t in 0..t_n {
        objective.push((bid[t], prices[t]));
        objective.push((dpos[t], sp.imbalance.rho_pos * prices[t]));
        objective.push((dneg[t], -sp.imbalance.rho_neg * prices[t]));
    }

    Ok(MixedIntegerDescription { vars, rows, objective })
}
