//! Domain types for the power-logistics system.
//!
//! Time is discretized into `horizon` hourly slots indexed `0..horizon`.
//! A vessel berthed over `[t_in, t_out]` (inclusive) occupies
//! `t_out - t_in + 1` slots; crane work is counted in crane-slots, with
//! `work_slots = ceil(cargo / crane_efficiency)` crane-slots required per
//! vessel and the per-slot crane count bounded by `[min_qc, max_qc]` while
//! berthed.

use serde::{Deserialize, Serialize};

use crate::error::{PortError, Result};

/// Hourly step; market quantities are per-slot MW / MWh with a 1 h slot.
pub const DT: f64 = 1.0;

/// Shared feasibility/cleanup tolerance for schedule validation.
pub const TOL: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EssParams {
    /// Charge/discharge power limit, MW.
    pub p_max: f64,
    /// Energy bounds, MWh.
    pub e_min: f64,
    pub e_max: f64,
    /// Initial stored energy, MWh. Terminal energy is constrained to end at
    /// or above this value so a day cannot spend energy it never paid for.
    pub e_init: f64,
    /// Charge/discharge efficiencies in (0, 1].
    pub eta_ch: f64,
    pub eta_dch: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ImbalancePrices {
    /// Upward deviation penalty factor (rho+ >= 1).
    pub rho_pos: f64,
    /// Downward deviation refund factor (0 <= rho- <= 1).
    pub rho_neg: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticParams {
    /// Number of hourly slots in the scheduling horizon.
    pub horizon: usize,
    /// Number of quay cranes.
    pub n_cranes: usize,
    /// Rated electric power of one crane, MW.
    pub crane_rated_power: f64,
    /// Handling rate of one crane, TEU/h.
    pub crane_efficiency: f64,
    /// Total berth length, m.
    pub berth_length: f64,
    pub ess: EssParams,
    pub imbalance: ImbalancePrices,
}

impl StaticParams {
    /// Port configuration used throughout the benchmark: ten 0.32 MW cranes
    /// at 70 TEU/h, an 800 m berth, a 5 MW / 15 MWh storage system at 0.9
    /// round-trip-leg efficiency, and 1.8 / 0.5 imbalance factors.
    pub fn jurong_like(horizon: usize) -> Self {
        StaticParams {
            horizon,
            n_cranes: 10,
            crane_rated_power: 0.32,
            crane_efficiency: 70.0,
            berth_length: 800.0,
            ess: EssParams {
                p_max: 5.0,
                e_min: 0.0,
                e_max: 15.0,
                e_init: 7.5,
                eta_ch: 0.9,
                eta_dch: 0.9,
            },
            imbalance: ImbalancePrices { rho_pos: 1.8, rho_neg: 0.5 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let im = &self.imbalance;
        if !(im.rho_pos >= 1.0 && 1.0 >= im.rho_neg && im.rho_neg >= 0.0) {
            return Err(PortError::BadInput(format!(
                "imbalance factors must satisfy rho+ >= 1 >= rho- >= 0, got {} / {}",
                im.rho_pos, im.rho_neg
            )));
        }
        let e = &self.ess;
        if !(e.e_min <= e.e_init && e.e_init <= e.e_max) {
            return Err(PortError::BadInput("ESS initial energy outside bounds".into()));
        }
        for (name, eta) in [("eta_ch", e.eta_ch), ("eta_dch", e.eta_dch)] {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(PortError::BadInput(format!("{name} must be in (0, 1], got {eta}")));
            }
        }
        if self.horizon == 0 || self.n_cranes == 0 {
            return Err(PortError::BadInput("horizon and crane count must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VesselSpec {
    /// Earliest berthing slot.
    pub arrival_time: usize,
    /// Latest departure slot (inclusive; clamped to the horizon on task build).
    pub max_leave_time: usize,
    /// Cargo to handle, TEU.
    pub cargo_volume: f64,
    /// Crane count bounds while berthed.
    pub min_qc: usize,
    pub max_qc: usize,
    /// Hotel load drawn from shore power while berthed, MW.
    pub base_power: f64,
    /// Total charging energy to deliver while berthed, MWh.
    pub charge_demand: f64,
    /// Charging power cap while berthed, MW.
    pub charge_max: f64,
    /// Vessel length, m.
    pub length: f64,
    /// Maximum waiting time after arrival, slots.
    pub max_wait: usize,
}

impl VesselSpec {
    /// Crane-slots of work required to clear the cargo.
    pub fn work_slots(&self, crane_efficiency: f64) -> usize {
        (self.cargo_volume / (crane_efficiency * DT)).ceil().max(1.0) as usize
    }

    /// Minimum berthed slots (all-out crane service).
    pub fn min_service_slots(&self, crane_efficiency: f64) -> usize {
        let w = self.work_slots(crane_efficiency);
        w.div_ceil(self.max_qc)
    }

    /// Maximum berthed slots (slowest admissible service).
    pub fn max_service_slots(&self, crane_efficiency: f64) -> usize {
        let w = self.work_slots(crane_efficiency);
        w.div_ceil(self.min_qc).max(self.min_service_slots(crane_efficiency))
    }
}

/// A scheduling task: static port data plus one vessel-arrival configuration
/// and the id of the dataset the task draws samples from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub static_params: StaticParams,
    pub vessels: Vec<VesselSpec>,
    pub dataset_binding: String,
}

impl Task {
    pub fn new(
        id: impl Into<String>,
        static_params: StaticParams,
        mut vessels: Vec<VesselSpec>,
        dataset_binding: impl Into<String>,
    ) -> Result<Self> {
        static_params.validate()?;
        if vessels.is_empty() {
            // An empty vessel list is allowed for pure-energy toy instances,
            // but fixture tasks always carry vessels.
        }
        let t_last = static_params.horizon - 1;
        for (j, v) in vessels.iter_mut().enumerate() {
            if v.max_leave_time > t_last {
                eprintln!(
                    "warning: task vessel {j}: deadline {} clamped to horizon end {t_last}",
                    v.max_leave_time
                );
                v.max_leave_time = t_last;
            }
            if v.arrival_time >= v.max_leave_time {
                return Err(PortError::BadInput(format!(
                    "vessel {j}: arrival {} must precede deadline {}",
                    v.arrival_time, v.max_leave_time
                )));
            }
            if !(1 <= v.min_qc && v.min_qc <= v.max_qc && v.max_qc <= static_params.n_cranes) {
                return Err(PortError::BadInput(format!(
                    "vessel {j}: crane bounds [{}, {}] invalid for {} cranes",
                    v.min_qc, v.max_qc, static_params.n_cranes
                )));
            }
            if v.charge_demand == 0.0 && v.charge_max != 0.0 {
                return Err(PortError::BadInput(format!(
                    "vessel {j}: zero charge demand requires zero charge cap"
                )));
            }
            if v.charge_demand > 0.0 && v.charge_max <= 0.0 {
                return Err(PortError::BadInput(format!(
                    "vessel {j}: positive charge demand requires positive cap"
                )));
            }
        }
        Ok(Task {
            id: id.into(),
            static_params,
            vessels,
            dataset_binding: dataset_binding.into(),
        })
    }

    pub fn horizon(&self) -> usize {
        self.static_params.horizon
    }

    pub fn n_vessels(&self) -> usize {
        self.vessels.len()
    }

    /// Vessels that can draw charging power at all.
    pub fn charging_vessels(&self) -> Vec<usize> {
        (0..self.vessels.len()).filter(|&j| self.vessels[j].charge_max > 0.0).collect()
    }
}

/// Binary berthing/crane plan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteAssignment {
    /// Per vessel: (berth position m, first berthed slot, last berthed slot).
    pub placements: Vec<Placement>,
    /// Berthed indicator, row-major vessels x slots.
    pub berthed: Vec<u8>,
    /// Crane identity assignment, [crane][vessel][slot] flattened.
    pub crane_assignment: Vec<u8>,
    pub n_vessels: usize,
    pub horizon: usize,
    pub n_cranes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub berth_pos: f64,
    pub t_in: usize,
    pub t_out: usize,
}

impl DiscreteAssignment {
    pub fn berthed_at(&self, vessel: usize, t: usize) -> bool {
        self.berthed[vessel * self.horizon + t] != 0
    }

    pub fn crane_at(&self, crane: usize, vessel: usize, t: usize) -> bool {
        self.crane_assignment[(crane * self.n_vessels + vessel) * self.horizon + t] != 0
    }

    /// Cranes serving a vessel in a slot.
    pub fn crane_count(&self, vessel: usize, t: usize) -> usize {
        (0..self.n_cranes).filter(|&k| self.crane_at(k, vessel, t)).count()
    }

    /// Total crane power profile in MW.
    pub fn quay_crane_power(&self, rated: f64) -> Vec<f64> {
        (0..self.horizon)
            .map(|t| {
                let total: usize = (0..self.n_vessels).map(|j| self.crane_count(j, t)).sum();
                rated * total as f64
            })
            .collect()
    }

    /// Builds the crane identity tensor from per-vessel per-slot counts,
    /// stacking contiguous crane blocks in berth-position order.
    pub fn from_counts(
        placements: Vec<Placement>,
        counts: &[Vec<usize>],
        horizon: usize,
        n_cranes: usize,
    ) -> Self {
        let n_vessels = placements.len();
        let mut berthed = vec![0u8; n_vessels * horizon];
        for (j, p) in placements.iter().enumerate() {
            for t in p.t_in..=p.t_out {
                berthed[j * horizon + t] = 1;
            }
        }
        let mut crane_assignment = vec![0u8; n_cranes * n_vessels * horizon];
        for t in 0..horizon {
            // Deterministic stacking: vessels ordered by berth position then index.
            let mut order: Vec<usize> = (0..n_vessels).collect();
            order.sort_by(|&a, &b| {
                placements[a]
                    .berth_pos
                    .partial_cmp(&placements[b].berth_pos)
                    .unwrap()
                    .then(a.cmp(&b))
            });
            let mut next_crane = 0usize;
            for &j in &order {
                let c = counts[j][t];
                for _ in 0..c {
                    debug_assert!(next_crane < n_cranes, "crane capacity exceeded in from_counts");
                    crane_assignment[(next_crane * n_vessels + j) * horizon + t] = 1;
                    next_crane += 1;
                }
            }
        }
        DiscreteAssignment { placements, berthed, crane_assignment, n_vessels, horizon, n_cranes }
    }
}

/// Full scheduling solution with the continuous dispatch attached to the
/// discrete plan, plus the inputs it was solved against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleSolution {
    /// Day-ahead energy bid, MW per slot.
    pub bid: Vec<f64>,
    /// Realized/planned consumption (power balance), MW per slot.
    pub consumption: Vec<f64>,
    pub ess_charge: Vec<f64>,
    pub ess_discharge: Vec<f64>,
    pub quay_crane_power: Vec<f64>,
    pub shore_power: Vec<f64>,
    /// Vessel charging power, row-major vessels x slots, MW.
    pub vessel_charge: Vec<f64>,
    /// Stored energy trace, length horizon + 1, MWh.
    pub energy: Vec<f64>,
    pub discrete: DiscreteAssignment,
    /// Objective under `prices`, currency.
    pub objective: f64,
    /// Inputs the solution was computed for.
    pub prices: Vec<f64>,
    pub net_load: Vec<f64>,
}

impl ScheduleSolution {
    pub fn charge_at(&self, vessel: usize, t: usize) -> f64 {
        self.vessel_charge[vessel * self.discrete.horizon + t]
    }
}
