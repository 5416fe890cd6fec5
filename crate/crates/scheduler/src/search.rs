//! Ground-truth day-ahead solver: greedy berth/window construction over
//! several priority orders, then a first-improvement local search with
//! seeded restarts. Neighborhood moves: shift a window, grow/shrink the
//! service (changing crane counts), and swap the berthing order of a pair;
//! crane blocks are reassigned by the exact allocator on every accepted
//! move.

use std::time::Instant;

use autodiff::rng::SplitMix64;
use port_model::{check_static_feasibility, ScheduleSolution, Task};

use crate::config::SearchConfig;
use crate::error::{Result, SchedError};
use crate::plan::{
    admissible_windows, assemble_solution, bottom_left_position, plan_cost, solve_ess_arbitrage,
    Window,
};

pub struct SolveOutcome {
    pub solution: ScheduleSolution,
    pub budget_exceeded: bool,
    pub restarts_used: usize,
}

pub fn solve_logistics(
    task: &Task,
    prices: &[f64],
    net_load: &[f64],
    cfg: &SearchConfig,
) -> Result<SolveOutcome> {
    let t_n = task.horizon();
    if prices.len() != t_n || net_load.len() != t_n {
        return Err(SchedError::BadInput("forecast length mismatch".into()));
    }
    if let Some(t) = prices.iter().position(|p| *p < 0.0) {
        return Err(SchedError::BadInput(format!(
            "negative price in slot {t}: the decomposition assumes nonnegative prices"
        )));
    }
    check_static_feasibility(task)?;
    let started = Instant::now();
    let over_budget =
        |started: &Instant| cfg.time_budget_ms.is_some_and(|ms| started.elapsed().as_millis() as u64 > ms);

    let ess = solve_ess_arbitrage(task, prices)?;
    let n_v = task.n_vessels();
    if n_v == 0 {
        let sol = assemble_solution(task, &[], prices, net_load, &ess)?;
        return Ok(SolveOutcome { solution: sol, budget_exceeded: false, restarts_used: 0 });
    }

    let mut rng = SplitMix64::new(cfg.seed);
    let mut best: Option<(f64, Vec<Window>)> = None;
    let mut budget_exceeded = false;
    let mut restarts_used = 0;

    for restart in 0..cfg.restarts.max(1) {
        restarts_used = restart + 1;
        let order = construction_order(task, restart / 3, &mut rng);
        // Rotate construction policies: cost-greedy, earliest-feasible, and
        // maximal service windows (crane slack for tight instances).
        let mode = match restart % 3 {
            0 => BuildMode::Cheapest,
            1 => BuildMode::Spread,
            _ => BuildMode::Earliest,
        };
        let Some(mut windows) = construct(task, &order, prices, mode) else {
            continue;
        };
        let mut cost = match plan_cost(task, &windows, prices, net_load, ess.cost, true) {
            Ok(c) => c,
            Err(_) => continue,
        };

        // First-improvement sweeps.
        'sweeps: for _ in 0..cfg.max_sweeps {
            let mut improved = false;
            for j in 0..n_v {
                if over_budget(&started) {
                    budget_exceeded = true;
                    break 'sweeps;
                }
                for (t_in, slots) in admissible_windows(task, j) {
                    if windows[j].t_in == t_in && windows[j].slots == slots {
                        continue;
                    }
                    if let Some(cand) = try_move(task, &windows, j, t_in, slots) {
                        if let Ok(c) = plan_cost(task, &cand, prices, net_load, ess.cost, false) {
                            if c < cost - 1e-9 {
                                // Confirm with the exact allocator before accepting.
                                if let Ok(ce) = plan_cost(task, &cand, prices, net_load, ess.cost, true) {
                                    if ce < cost - 1e-9 {
                                        windows = cand;
                                        cost = ce;
                                        improved = true;
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // Pairwise berth-order swaps.
            for i in 0..n_v {
                for j in (i + 1)..n_v {
                    if let Some(cand) = try_swap(task, &windows, i, j) {
                        if let Ok(ce) = plan_cost(task, &cand, prices, net_load, ess.cost, true) {
                            if ce < cost - 1e-9 {
                                windows = cand;
                                cost = ce;
                                improved = true;
                            }
                        }
                    }
                }
            }
            if !improved {
                break;
            }
        }

        if best.as_ref().is_none_or(|(bc, _)| cost < *bc - 1e-9) {
            best = Some((cost, windows));
        }
        if budget_exceeded {
            break;
        }
    }

    let Some((_, windows)) = best else {
        return Err(SchedError::Infeasible(
            "no feasible berth/crane plan found across restarts".into(),
        ));
    };
    let solution = assemble_solution(task, &windows, prices, net_load, &ess)?;
    Ok(SolveOutcome { solution, budget_exceeded, restarts_used })
}

/// Deterministic priority orders, then seeded shuffles.
fn construction_order(task: &Task, restart: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let sp = &task.static_params;
    let n_v = task.n_vessels();
    let mut order: Vec<usize> = (0..n_v).collect();
    match restart {
        // Tightest vessels first: crane work relative to the window the
        // deadline leaves them.
        0 => order.sort_by(|&a, &b| {
            let tight = |j: usize| {
                let v = &task.vessels[j];
                let width = (v.max_leave_time.min(sp.horizon - 1) + 1 - v.arrival_time) as f64;
                v.work_slots(sp.crane_efficiency) as f64 / (v.max_qc as f64 * width)
            };
            tight(b).partial_cmp(&tight(a)).unwrap().then(a.cmp(&b))
        }),
        // Longest vessels first (hardest to pack).
        1 => order.sort_by(|&a, &b| {
            task.vessels[b]
                .length
                .partial_cmp(&task.vessels[a].length)
                .unwrap()
                .then(a.cmp(&b))
        }),
        // Tightest deadline slack first.
        2 => order.sort_by_key(|&j| {
            let v = &task.vessels[j];
            let slack = v.max_leave_time.min(sp.horizon - 1) as i64
                - (v.arrival_time + v.min_service_slots(sp.crane_efficiency) - 1) as i64;
            (slack, j as i64)
        }),
        _ => {
            let mut r = rng.fork(restart as u64);
            r.shuffle(&mut order);
        }
    }
    order
}

#[derive(Clone, Copy, PartialEq)]
enum BuildMode {
    Cheapest,
    Earliest,
    /// Longest admissible window, earliest start: maximizes the slack the
    /// crane allocator has to work with.
    Spread,
}

/// Score of a candidate window under the construction policy, or None when
/// the window cannot host the vessel's charging demand.
fn window_score(task: &Task, j: usize, t_in: usize, slots: usize, prices: &[f64], mode: BuildMode) -> Option<f64> {
    let sp = &task.static_params;
    let v = &task.vessels[j];
    if v.charge_demand > 0.0 {
        let deliverable = v.charge_max * slots as f64;
        if deliverable + 1e-9 < v.charge_demand {
            return None;
        }
    }
    Some(match mode {
        BuildMode::Earliest => (t_in * 64 + slots) as f64,
        BuildMode::Spread => (64 - slots.min(63)) as f64 * 64.0 + t_in as f64,
        BuildMode::Cheapest => {
            let mut score = 0.0;
            for t in t_in..t_in + slots {
                score += prices[t] * v.base_power;
            }
            let work = v.work_slots(sp.crane_efficiency) as f64;
            let mean_price: f64 = (t_in..t_in + slots).map(|t| prices[t]).sum::<f64>() / slots as f64;
            score += mean_price * sp.crane_rated_power * work;
            if v.charge_demand > 0.0 {
                let mut ps: Vec<f64> = (t_in..t_in + slots).map(|t| prices[t]).collect();
                ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let mut rem = v.charge_demand;
                for p in ps {
                    if rem <= 0.0 {
                        break;
                    }
                    let take = rem.min(v.charge_max);
                    score += p * take;
                    rem -= take;
                }
            }
            score
        }
    })
}

/// Budgeted depth-first construction: vessels are placed in order, each at
/// its best-scoring feasible window; dead ends backtrack to the previous
/// vessel's next candidate. Leaves are verified with the exact crane
/// allocator so a greedy-screen false positive cannot end the search.
fn construct(task: &Task, order: &[usize], prices: &[f64], mode: BuildMode) -> Option<Vec<Window>> {
    const NODE_BUDGET: usize = 80_000;
    let n_v = order.len();
    // Candidate lists per depth: policy-sorted, but with the structurally
    // extreme windows (shortest-early, longest-early) pulled to the front so
    // backtracking reaches qualitatively different shapes quickly.
    let cands: Vec<Vec<(usize, usize)>> = order
        .iter()
        .map(|&j| {
            let mut ws: Vec<(f64, (usize, usize))> = admissible_windows(task, j)
                .into_iter()
                .filter_map(|(t_in, s)| window_score(task, j, t_in, s, prices, mode).map(|sc| (sc, (t_in, s))))
                .collect();
            ws.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            let mut list: Vec<(usize, usize)> = ws.iter().map(|&(_, w)| w).collect();
            let mut front: Vec<(usize, usize)> = Vec::new();
            if let Some(&w) = list.first() {
                front.push(w);
            }
            if let Some(&w) = list.iter().min_by_key(|&&(t_in, s)| (s, t_in)) {
                front.push(w);
            }
            if let Some(&w) = list.iter().max_by_key(|&&(t_in, s)| (s, usize::MAX - t_in)) {
                front.push(w);
            }
            let mut seen = Vec::new();
            for w in front.into_iter().chain(list.drain(..)) {
                if !seen.contains(&w) {
                    seen.push(w);
                }
            }
            seen
        })
        .collect();

    let mut placed: Vec<(usize, Window)> = Vec::new();
    let mut cursor = vec![0usize; n_v];
    let mut depth = 0usize;
    let mut nodes = 0usize;
    loop {
        if depth == n_v {
            // Exact feasibility at the leaf.
            let mut sorted = placed.clone();
            sorted.sort_by_key(|(j, _)| *j);
            let windows: Vec<Window> = sorted.iter().map(|(_, w)| *w).collect();
            if crate::plan::allocate_cranes(task, &windows, prices, true).is_ok() {
                return Some(windows);
            }
            depth -= 1;
            placed.pop();
            cursor[depth] += 1;
            continue;
        }
        nodes += 1;
        if nodes > NODE_BUDGET {
            return None;
        }
        let j = order[depth];
        let mut advanced = false;
        while cursor[depth] < cands[depth].len() {
            let (t_in, slots) = cands[depth][cursor[depth]];
            let Some(berth) = bottom_left_position(task, j, t_in, slots, &placed) else {
                cursor[depth] += 1;
                continue;
            };
            let w = Window { t_in, slots, berth };
            // Shared crane pool: per-slot minimum counts must fit.
            let mut fits = true;
            for t in t_in..t_in + slots {
                let used: usize = placed
                    .iter()
                    .filter(|(_, ww)| ww.covers(t))
                    .map(|(jj, _)| task.vessels[*jj].min_qc)
                    .sum();
                if used + task.vessels[j].min_qc > task.static_params.n_cranes {
                    fits = false;
                    break;
                }
            }
            if !fits {
                cursor[depth] += 1;
                continue;
            }
            placed.push((j, w));
            depth += 1;
            if depth < n_v {
                cursor[depth] = 0;
            }
            advanced = true;
            break;
        }
        if !advanced {
            if depth == 0 {
                return None;
            }
            cursor[depth] = 0;
            depth -= 1;
            placed.pop();
            cursor[depth] += 1;
        }
    }
}

/// Re-places vessel `j` at a new window, re-deriving its berth position
/// bottom-left against the others.
fn try_move(
    task: &Task,
    windows: &[Window],
    j: usize,
    t_in: usize,
    slots: usize,
) -> Option<Vec<Window>> {
    let placed: Vec<(usize, Window)> = windows
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != j)
        .map(|(i, w)| (i, *w))
        .collect();
    let berth = bottom_left_position(task, j, t_in, slots, &placed)?;
    let mut out = windows.to_vec();
    out[j] = Window { t_in, slots, berth };
    Some(out)
}

/// Swaps the berth stacking order of two time-overlapping vessels by
/// re-running bottom-left placement with the pair reversed.
fn try_swap(task: &Task, windows: &[Window], i: usize, j: usize) -> Option<Vec<Window>> {
    let wi = windows[i];
    let wj = windows[j];
    if wi.t_in > wj.t_out() || wj.t_in > wi.t_out() {
        return None;
    }
    let mut placed: Vec<(usize, Window)> = windows
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != i && *k != j)
        .map(|(k, w)| (k, *w))
        .collect();
    // Place j first, then i.
    let bj = bottom_left_position(task, j, wj.t_in, wj.slots, &placed)?;
    placed.push((j, Window { berth: bj, ..wj }));
    let bi = bottom_left_position(task, i, wi.t_in, wi.slots, &placed)?;
    let mut out = windows.to_vec();
    out[j] = Window { berth: bj, ..wj };
    out[i] = Window { berth: bi, ..wi };
    Some(out)
}
