//! Memory-set construction: each (net-load, price) sample is solved to a
//! ground-truth discrete plan whose crane power profile and berthing matrix
//! become the stored labels for the differentiable KNN surrogate.

use port_model::{validate_schedule, Task};

use crate::config::SearchConfig;
use crate::error::Result;
use crate::search::solve_logistics;

/// One stored sample: features u = [net_load, prices] and the labels.
#[derive(Debug, Clone)]
pub struct MemoryEntry {
    pub task_id: String,
    /// [net_load (T), prices (T)]
    pub features: Vec<f64>,
    /// Crane power profile, length T.
    pub label_qc: Vec<f64>,
    /// Berthing matrix flattened row-major (vessels x slots), binary.
    pub label_berthing: Vec<f64>,
}

/// Solves every sample; infeasible or invalid samples are skipped with a
/// warning rather than failing the batch.
pub fn build_memory_set(
    task: &Task,
    samples: &[(Vec<f64>, Vec<f64>)],
    cfg: &SearchConfig,
) -> Result<Vec<MemoryEntry>> {
    let t_n = task.horizon();
    let mut out = Vec::with_capacity(samples.len());
    for (i, (net_load, prices)) in samples.iter().enumerate() {
        let outcome = match solve_logistics(task, prices, net_load, cfg) {
            Ok(o) => o,
            Err(e) => {
                eprintln!("warning: memory sample {i} skipped: {e}");
                continue;
            }
        };
        let sol = outcome.solution;
        let report = validate_schedule(task, &sol);
        if !report.is_empty() {
            eprintln!(
                "warning: memory sample {i} skipped: solver output failed validation ({} violations)",
                report.violations.len()
            );
            continue;
        }
        let mut features = Vec::with_capacity(2 * t_n);
        features.extend_from_slice(net_load);
        features.extend_from_slice(prices);
        let label_berthing: Vec<f64> =
            sol.discrete.berthed.iter().map(|&b| f64::from(b)).collect();
        out.push(MemoryEntry {
            task_id: task.id.clone(),
            features,
            label_qc: sol.quay_crane_power.clone(),
            label_berthing,
        });
    }
    Ok(out)
}
