//! Fixed, versioned feature layouts.
//!
//! Context vector (per forecast target): 72 hourly values immediately before
//! the window, 24 values from one week earlier, one-hot hour-of-day of the
//! window start, one-hot day-of-week, and (net-load models only) 24 hours of
//! irradiance covering the first day of the window.

use port_model::VesselSpec;

pub const PAST_HOURS: usize = 72;
pub const WEEK_AGO_HOURS: usize = 24;
pub const HOUR_ONEHOT: usize = 24;
pub const DOW_ONEHOT: usize = 7;
pub const IRRADIANCE_HOURS: usize = 24;
pub const VESSEL_FEATURES: usize = 10;
pub const FEATURE_LAYOUT_VERSION: u32 = 1;

/// Hours of history a window start must have available.
pub const LOOKBACK_HOURS: usize = 24 * 7;

pub fn context_dim(with_irradiance: bool) -> usize {
    let base = PAST_HOURS + WEEK_AGO_HOURS + HOUR_ONEHOT + DOW_ONEHOT;
    if with_irradiance {
        base + IRRADIANCE_HOURS
    } else {
        base
    }
}

/// Assembles a context vector for a forecast window starting at hourly index
/// `start` of `series`. `irradiance` must cover the same calendar.
pub fn build_context(
    series: &[f64],
    irradiance: Option<&[f64]>,
    start: usize,
    day_of_week: usize,
) -> Vec<f64> {
    assert!(start >= LOOKBACK_HOURS, "window start lacks lookback history");
    let mut out = Vec::with_capacity(context_dim(irradiance.is_some()));
    out.extend_from_slice(&series[start - PAST_HOURS..start]);
    out.extend_from_slice(&series[start - LOOKBACK_HOURS..start - LOOKBACK_HOURS + WEEK_AGO_HOURS]);
    let hour = start % 24;
    for h in 0..HOUR_ONEHOT {
        out.push(if h == hour { 1.0 } else { 0.0 });
    }
    for d in 0..DOW_ONEHOT {
        out.push(if d == day_of_week % 7 { 1.0 } else { 0.0 });
    }
    if let Some(irr) = irradiance {
        out.extend_from_slice(&irr[start..start + IRRADIANCE_HOURS]);
    }
    out
}

/// Nominal scales pinning vessel features to O(1); constant per layout
/// version so checkpoints stay comparable.
const VESSEL_SCALES: [f64; VESSEL_FEATURES] =
    [32.0, 32.0, 3000.0, 10.0, 10.0, 5.0, 15.0, 4.0, 200.0, 10.0];

pub fn vessel_features(v: &VesselSpec) -> [f64; VESSEL_FEATURES] {
    let raw = [
        v.arrival_time as f64,
        v.max_leave_time as f64,
        v.cargo_volume,
        v.min_qc as f64,
        v.max_qc as f64,
        v.base_power,
        v.charge_demand,
        v.charge_max,
        v.length,
        v.max_wait as f64,
    ];
    let mut out = [0.0; VESSEL_FEATURES];
    for (o, (r, s)) in out.iter_mut().zip(raw.iter().zip(&VESSEL_SCALES)) {
        *o = r / s;
    }
    out
}

pub fn vessel_matrix(vessels: &[VesselSpec]) -> Vec<f64> {
    let mut out = Vec::with_capacity(vessels.len() * VESSEL_FEATURES);
    for v in vessels {
        out.extend_from_slice(&vessel_features(v));
    }
    out
}
