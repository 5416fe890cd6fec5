//! Solution export: full JSON and compact Gantt CSV rows.

use port_model::ScheduleSolution;

pub fn solution_to_json(sol: &ScheduleSolution) -> String {
    serde_json::to_string_pretty(sol).expect("solution serialization cannot fail")
}

/// One CSV row per vessel: vessel, t_in, t_out, berth_pos, crane counts over
/// the berthing interval joined by ';'.
pub fn gantt_csv(sol: &ScheduleSolution) -> String {
    let mut out = String::from("vessel,t_in,t_out,berth_pos,crane_slots\n");
    for (j, p) in sol.discrete.placements.iter().enumerate() {
        let counts: Vec<String> =
            (p.t_in..=p.t_out).map(|t| sol.discrete.crane_count(j, t).to_string()).collect();
        out.push_str(&format!(
            "{j},{},{},{},{}\n",
            p.t_in,
            p.t_out,
            p.berth_pos,
            counts.join(";")
        ));
    }
    out
}
