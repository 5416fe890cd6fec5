//! Exhaustive oracle for tiny instances: every combination of per-vessel
//! windows, berth-packing feasibility by bottom-left over all stacking
//! permutations, exact crane transportation, and the same separable
//! continuous machinery as the heuristic.

use port_model::{check_static_feasibility, ScheduleSolution, Task};

use crate::error::{Result, SchedError};
use crate::plan::{
    admissible_windows, assemble_solution, bottom_left_position, plan_cost, solve_ess_arbitrage,
    Window,
};

const MAX_VESSELS: usize = 3;
const MAX_HORIZON: usize = 8;
const MAX_CRANES: usize = 3;

pub fn brute_force_tiny(task: &Task, prices: &[f64], net_load: &[f64]) -> Result<ScheduleSolution> {
    let sp = &task.static_params;
    if task.n_vessels() > MAX_VESSELS || sp.horizon > MAX_HORIZON || sp.n_cranes > MAX_CRANES {
        return Err(SchedError::InstanceTooLarge(format!(
            "J <= {MAX_VESSELS}, T <= {MAX_HORIZON}, K <= {MAX_CRANES} required, got J={} T={} K={}",
            task.n_vessels(),
            sp.horizon,
            sp.n_cranes
        )));
    }
    if let Some(t) = prices.iter().position(|p| *p < 0.0) {
        return Err(SchedError::BadInput(format!("negative price in slot {t}")));
    }
    check_static_feasibility(task)?;
    let ess = solve_ess_arbitrage(task, prices)?;
    let n_v = task.n_vessels();
    if n_v == 0 {
        let sol = assemble_solution(task, &[], prices, net_load, &ess)?;
        return Ok(sol);
    }

    let choices: Vec<Vec<(usize, usize)>> =
        (0..n_v).map(|j| admissible_windows(task, j)).collect();
    let mut idx = vec![0usize; n_v];
    let mut best: Option<(f64, Vec<Window>)> = None;

    'outer: loop {
        let picks: Vec<(usize, usize)> = (0..n_v).map(|j| choices[j][idx[j]]).collect();
        if let Some(windows) = pack(task, &picks) {
            if let Ok(cost) = plan_cost(task, &windows, prices, net_load, ess.cost, true) {
                if best.as_ref().is_none_or(|(bc, _)| cost < *bc - 1e-12) {
                    best = Some((cost, windows));
                }
            }
        }
        // Next combination.
        for j in 0..n_v {
            idx[j] += 1;
            if idx[j] < choices[j].len() {
                continue 'outer;
            }
            idx[j] = 0;
            if j == n_v - 1 {
                break 'outer;
            }
        }
    }

    let Some((_, windows)) = best else {
        return Err(SchedError::Infeasible("no feasible window combination".into()));
    };
    assemble_solution(task, &windows, prices, net_load, &ess)
}

/// Feasible berth packing for fixed windows, trying bottom-left placement
/// over every stacking permutation (exhaustive for <= 3 rectangles).
fn pack(task: &Task, picks: &[(usize, usize)]) -> Option<Vec<Window>> {
    let n_v = picks.len();
    let mut order: Vec<usize> = (0..n_v).collect();
    let mut perms: Vec<Vec<usize>> = Vec::new();
    permutations(&mut order, 0, &mut perms);
    for perm in perms {
        let mut placed: Vec<(usize, Window)> = Vec::new();
        let mut ok = true;
        for &j in &perm {
            let (t_in, slots) = picks[j];
            match bottom_left_position(task, j, t_in, slots, &placed) {
                Some(berth) => placed.push((j, Window { t_in, slots, berth })),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            placed.sort_by_key(|(j, _)| *j);
            return Some(placed.into_iter().map(|(_, w)| w).collect());
        }
    }
    None
}

fn permutations(xs: &mut Vec<usize>, k: usize, out: &mut Vec<Vec<usize>>) {
    if k == xs.len() {
        out.push(xs.clone());
        return;
    }
    for i in k..xs.len() {
        xs.swap(k, i);
        permutations(xs, k + 1, out);
        xs.swap(k, i);
    }
}
