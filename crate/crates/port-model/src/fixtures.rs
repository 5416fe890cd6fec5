//! Built-in vessel-arrival fixtures (tasks 1-6) and JSON ingestion.
//!
//! The JSON schema mirrors the archival per-vessel tables: one object per
//! vessel with fields `arrival_time`, `max_leave_time`, `cargo_volume`,
//! `min_quay_crane`, `max_quay_crane`, `base_power_load`,
//! `charge_power_demand`, `charge_power_max`, `length`, `max_waiting_time`.

use serde::Deserialize;

use crate::error::{PortError, Result};
use crate::types::{StaticParams, Task, VesselSpec};

pub const DEFAULT_HORIZON: usize = 32;
pub const N_FIXTURES: usize = 6;

/// (arr, dep, cargo, min_qc, max_qc, base, chg_dem, chg_max, len, wait)
type Row = (usize, usize, f64, usize, usize, f64, f64, f64, f64, usize);

const TASK1: &[Row] = &[
    (0, 14, 2866.0, 1, 3, 4.0, 7.0, 1.59, 148.0, 5),
    (0, 9, 1816.0, 1, 3, 1.0, 11.0, 2.5, 122.0, 5),
    (0, 14, 913.0, 1, 3, 1.0, 0.0, 0.0, 164.0, 5),
    (2, 10, 1606.0, 1, 3, 4.0, 11.0, 1.375, 199.0, 5),
    (3, 9, 493.0, 1, 2, 2.0, 8.0, 1.66, 95.0, 5),
    (5, 15, 1351.0, 1, 2, 2.0, 11.0, 2.16, 134.0, 5),
    (7, 20, 746.0, 1, 1, 2.0, 0.0, 0.0, 102.0, 5),
    (10, 22, 2446.0, 1, 3, 3.0, 0.0, 0.0, 83.0, 5),
    (14, 26, 668.0, 1, 3, 1.0, 0.0, 0.0, 107.0, 5),
];

const TASK2: &[Row] = &[
    (0, 14, 2866.0, 1, 3, 3.0, 12.0, 1.36, 148.0, 5),
    (3, 12, 606.0, 1, 1, 3.0, 14.0, 2.46, 143.0, 5),
    (4, 10, 869.0, 2, 3, 3.0, 0.0, 0.0, 151.0, 5),
    (6, 12, 549.0, 1, 3, 2.0, 0.0, 0.0, 113.0, 5),
    (8, 14, 846.0, 2, 3, 2.0, 0.0, 0.0, 121.0, 5),
    (9, 17, 1071.0, 2, 2, 3.0, 13.0, 3.33, 111.0, 5),
    (10, 17, 931.0, 1, 2, 3.0, 6.0, 1.25, 145.0, 5),
    (11, 24, 886.0, 1, 1, 3.0, 9.0, 3.75, 88.0, 5),
    (15, 21, 567.0, 1, 3, 1.0, 0.0, 0.0, 184.0, 5),
];

const TASK3: &[Row] = &[
    (0, 11, 2236.0, 1, 3, 3.0, 0.0, 0.0, 152.0, 5),
    (3, 15, 2446.0, 1, 3, 1.0, 13.0, 2.28, 188.0, 5),
    (7, 19, 832.0, 1, 2, 4.0, 0.0, 0.0, 153.0, 5),
    (9, 23, 2866.0, 1, 3, 4.0, 5.0, 1.28, 153.0, 5),
    (10, 20, 1351.0, 1, 2, 4.0, 0.0, 0.0, 144.0, 5),
    (12, 18, 1582.0, 2, 4, 3.0, 5.0, 1.25, 101.0, 5),
    (13, 20, 838.0, 2, 2, 2.0, 0.0, 0.0, 89.0, 5),
    (14, 23, 497.0, 1, 1, 2.0, 0.0, 0.0, 124.0, 5),
    (15, 25, 673.0, 1, 3, 2.0, 0.0, 0.0, 110.0, 5),
];

const TASK4: &[Row] = &[
    (0, 13, 558.0, 1, 3, 1.0, 0.0, 0.0, 166.0, 5),
    (0, 8, 1606.0, 2, 3, 2.0, 10.0, 2.27, 155.0, 5),
    (0, 10, 2026.0, 1, 3, 2.0, 12.0, 1.82, 169.0, 5),
    (3, 9, 932.0, 2, 4, 4.0, 0.0, 0.0, 82.0, 5),
    (6, 18, 2446.0, 1, 3, 4.0, 0.0, 0.0, 178.0, 5),
    (9, 19, 466.0, 1, 3, 4.0, 0.0, 0.0, 99.0, 5),
    (10, 23, 582.0, 1, 3, 2.0, 0.0, 0.0, 147.0, 5),
    (13, 26, 2656.0, 1, 3, 2.0, 0.0, 0.0, 140.0, 5),
    (15, 29, 2866.0, 1, 3, 3.0, 0.0, 0.0, 153.0, 5),
    (16, 28, 681.0, 1, 2, 4.0, 0.0, 0.0, 124.0, 5),
    (17, 23, 763.0, 2, 2, 4.0, 0.0, 0.0, 141.0, 5),
];

const TASK5: &[Row] = &[
    (0, 7, 931.0, 1, 2, 1.0, 0.0, 0.0, 83.0, 5),
    (0, 7, 450.0, 1, 1, 1.0, 0.0, 0.0, 173.0, 5),
    (1, 9, 905.0, 2, 4, 2.0, 0.0, 0.0, 198.0, 5),
    (4, 17, 1771.0, 1, 2, 4.0, 0.0, 0.0, 151.0, 5),
    (7, 20, 2656.0, 1, 3, 2.0, 0.0, 0.0, 153.0, 5),
    (11, 23, 2446.0, 1, 3, 4.0, 0.0, 0.0, 156.0, 5),
    (14, 25, 640.0, 1, 1, 4.0, 0.0, 0.0, 189.0, 5),
    (15, 29, 516.0, 1, 3, 1.0, 0.0, 0.0, 171.0, 5),
    (16, 25, 606.0, 1, 1, 3.0, 0.0, 0.0, 80.0, 5),
];

const TASK6: &[Row] = &[
    (0, 8, 555.0, 1, 2, 3.0, 0.0, 0.0, 87.0, 5),
    (0, 11, 921.0, 1, 3, 2.0, 0.0, 0.0, 172.0, 5),
    (2, 8, 830.0, 2, 3, 3.0, 0.0, 0.0, 180.0, 5),
    (6, 16, 484.0, 1, 2, 3.0, 0.0, 0.0, 159.0, 5),
    (8, 21, 886.0, 1, 1, 1.0, 9.0, 1.07, 160.0, 5),
    (11, 21, 1351.0, 1, 2, 4.0, 13.0, 2.36, 195.0, 5),
    (13, 27, 1911.0, 1, 2, 3.0, 12.0, 2.31, 78.0, 5),
    (17, 28, 746.0, 1, 1, 4.0, 0.0, 0.0, 156.0, 5),
    (18, 31, 886.0, 1, 1, 2.0, 13.0, 2.71, 143.0, 5),
];

fn rows_to_vessels(rows: &[Row]) -> Vec<VesselSpec> {
    rows.iter()
        .map(|&(arr, dep, cargo, min_qc, max_qc, base, dem, cap, len, wait)| VesselSpec {
            arrival_time: arr,
            max_leave_time: dep,
            cargo_volume: cargo,
            min_qc,
            max_qc,
            base_power: base,
            charge_demand: dem,
            charge_max: cap,
            length: len,
            max_wait: wait,
        })
        .collect()
}

/// Loads one of the built-in tasks (ids 1..=6) at the default 32-slot horizon.
pub fn load_fixture(id: usize) -> Result<Task> {
    load_fixture_with_horizon(id, DEFAULT_HORIZON)
}

pub fn load_fixture_with_horizon(id: usize, horizon: usize) -> Result<Task> {
    let rows = match id {
        1 => TASK1,
        2 => TASK2,
        3 => TASK3,
        4 => TASK4,
        5 => TASK5,
        6 => TASK6,
        _ => return Err(PortError::Fixture(format!("unknown task id {id} (valid: 1..=6)"))),
    };
    Task::new(
        format!("task{id}"),
        StaticParams::jurong_like(horizon),
        rows_to_vessels(rows),
        format!("synthetic:task{id}"),
    )
}

#[derive(Debug, Deserialize)]
struct VesselJson {
    arrival_time: f64,
    max_leave_time: f64,
    cargo_volume: f64,
    min_quay_crane: f64,
    max_quay_crane: f64,
    base_power_load: f64,
    charge_power_demand: f64,
    charge_power_max: f64,
    length: f64,
    max_waiting_time: f64,
}

#[derive(Debug, Deserialize)]
struct TaskJson {
    id: String,
    #[serde(default)]
    horizon: Option<usize>,
    vessels: Vec<VesselJson>,
    #[serde(default)]
    dataset_binding: Option<String>,
}

/// Parses a task from JSON with the archival column names.
pub fn task_from_json(json: &str) -> Result<Task> {
    let parsed: TaskJson =
        serde_json::from_str(json).map_err(|e| PortError::Fixture(e.to_string()))?;
    let horizon = parsed.horizon.unwrap_or(DEFAULT_HORIZON);
    let vessels = parsed
        .vessels
        .into_iter()
        .map(|v| VesselSpec {
            arrival_time: v.arrival_time as usize,
            max_leave_time: v.max_leave_time as usize,
            cargo_volume: v.cargo_volume,
            min_qc: v.min_quay_crane as usize,
            max_qc: v.max_quay_crane as usize,
            base_power: v.base_power_load,
            charge_demand: v.charge_power_demand,
            charge_max: v.charge_power_max,
            length: v.length,
            max_wait: v.max_waiting_time as usize,
        })
        .collect();
    let binding = parsed.dataset_binding.unwrap_or_else(|| format!("external:{}", parsed.id));
    Task::new(parsed.id, StaticParams::jurong_like(horizon), vessels, binding)
}
