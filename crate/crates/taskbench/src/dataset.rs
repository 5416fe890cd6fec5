//! Hourly market/port series: a seeded synthetic generator (bimodal daily
//! price and load shapes, long-tailed price spikes, zero-at-night PV) and
//! CSV ingestion with gap checking. The first seven days of every dataset
//! are feature lookback and never used as forecast windows.

use autodiff::rng::SplitMix64;

use crate::error::{BenchError, Result};

/// Days of lookback before the first usable window.
pub const WARMUP_DAYS: usize = 7;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub price: Vec<f64>,
    pub load: Vec<f64>,
    pub pv: Vec<f64>,
    pub irradiance: Vec<f64>,
    /// Usable days after warmup, split train then test.
    pub train_days: usize,
    pub test_days: usize,
    /// Day-of-week of hour 0.
    pub start_dow: usize,
}

impl Dataset {
    pub fn n_hours(&self) -> usize {
        self.price.len()
    }

    pub fn usable_days(&self) -> usize {
        self.train_days + self.test_days
    }

    /// Hourly index at which usable day `d` starts.
    pub fn window_start(&self, day: usize) -> usize {
        (WARMUP_DAYS + day) * 24
    }

    pub fn day_of_week(&self, day: usize) -> usize {
        (self.start_dow + WARMUP_DAYS + day) % 7
    }

    pub fn net_load_window(&self, day: usize, horizon: usize) -> Vec<f64> {
        let s = self.window_start(day);
        (s..s + horizon).map(|h| self.load[h] - self.pv[h]).collect()
    }

    pub fn price_window(&self, day: usize, horizon: usize) -> Vec<f64> {
        let s = self.window_start(day);
        self.price[s..s + horizon].to_vec()
    }

    pub fn net_load_series(&self) -> Vec<f64> {
        self.load.iter().zip(&self.pv).map(|(l, p)| l - p).collect()
    }

    pub fn validate(&self, horizon: usize) -> Result<()> {
        let need = (WARMUP_DAYS + self.usable_days()) * 24 + horizon.saturating_sub(24);
        for (name, s) in
            [("price", &self.price), ("load", &self.load), ("pv", &self.pv), ("irradiance", &self.irradiance)]
        {
            if s.len() < need {
                return Err(BenchError::Data(format!(
                    "{name} series has {} hours, need {need}",
                    s.len()
                )));
            }
            if !s.iter().all(|v| v.is_finite()) {
                return Err(BenchError::Data(format!("{name} series has non-finite values")));
            }
        }
        Ok(())
    }
}

/// Deterministic synthetic dataset. `days` counts usable days (the warmup
/// week is generated on top), split into train/test by the caller's config.
pub fn generate_synthetic(seed: u64, days: usize, train_days: usize) -> Result<Dataset> {
    if days < 14 {
        return Err(BenchError::Data("need at least 14 usable days".into()));
    }
    if train_days > days {
        return Err(BenchError::Data("train split exceeds dataset".into()));
    }
    let total_days = days + WARMUP_DAYS + 2; // spill for windows past midnight
    let n = total_days * 24;
    let mut rng = SplitMix64::new(seed ^ 0xD47A_5EED);
    let mut price = Vec::with_capacity(n);
    let mut load = Vec::with_capacity(n);
    let mut pv = Vec::with_capacity(n);
    let mut irr = Vec::with_capacity(n);

    let mut price_ar = 0.0;
    let mut load_ar = 0.0;
    let mut weather = 0.7;
    for day in 0..total_days {
        let dow = day % 7;
        let weekend = dow >= 5;
        let annual = (std::f64::consts::TAU * (day % 365) as f64 / 365.0).sin();
        // Day-scale weather persistence for PV.
        weather = (0.75 * weather + 0.25 * rng.uniform(0.25, 1.0)).clamp(0.2, 1.0);
        for h in 0..24 {
            let hf = h as f64;
            // Bimodal daily shapes: morning and evening humps.
            let bump = |center: f64, width: f64| {
                let d = (hf - center) / width;
                (-0.5 * d * d).exp()
            };
            price_ar = 0.8 * price_ar + rng.normal() * 4.0;
            let mut p = 46.0
                + (if weekend { -6.0 } else { 4.0 })
                + 24.0 * bump(8.5, 2.2)
                + 30.0 * bump(19.0, 2.6)
                - 10.0 * bump(3.0, 3.0)
                + 3.0 * annual
                + price_ar;
            // Long-tailed spikes.
            if rng.next_f64() < 0.008 {
                p += 60.0 + 220.0 * rng.next_f64() * rng.next_f64();
            }
            price.push(p.max(1.0));

            load_ar = 0.85 * load_ar + rng.normal() * 0.7;
            let l = 20.0 * (if weekend { 0.93 } else { 1.04 })
                + 3.5 * bump(9.0, 2.5)
                + 4.5 * bump(19.5, 2.8)
                - 2.0 * bump(3.5, 2.5)
                + 1.2 * annual
                + load_ar;
            load.push(l.max(3.0));

            // Irradiance: daylight bell scaled by season and weather.
            let daylight = if (6..18).contains(&h) {
                let x = std::f64::consts::PI * (hf - 6.0) / 12.0;
                x.sin().powi(2)
            } else {
                0.0
            };
            let season = 0.75 + 0.25 * annual;
            let i = daylight * season * weather * (1.0 + 0.08 * rng.normal()).max(0.0);
            irr.push(i.max(0.0));
            pv.push(8.0 * i.max(0.0));
        }
    }
    let ds = Dataset {
        price,
        load,
        pv,
        irradiance: irr,
        train_days,
        test_days: days - train_days,
        start_dow: 0,
    };
    ds.validate(32)?;
    Ok(ds)
}

/// Exports the hourly series with a synthetic hourly calendar.
pub fn to_csv(ds: &Dataset) -> String {
    let mut out = String::from("timestamp,price,load,pv,irradiance\n");
    for h in 0..ds.n_hours() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            hour_to_timestamp(h),
            ds.price[h],
            ds.load[h],
            ds.pv[h],
            ds.irradiance[h]
        ));
    }
    out
}

/// Parses an hourly CSV with header `timestamp,price,load,pv,irradiance`,
/// rejecting gaps and non-monotone timestamps.
pub fn from_csv(text: &str, train_days: usize, test_days: usize) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| BenchError::Data("empty file".into()))?;
    if header.trim() != "timestamp,price,load,pv,irradiance" {
        return Err(BenchError::Data(format!(
            "expected header 'timestamp,price,load,pv,irradiance', got '{header}'"
        )));
    }
    let mut price = Vec::new();
    let mut load = Vec::new();
    let mut pv = Vec::new();
    let mut irr = Vec::new();
    let mut prev_hour: Option<i64> = None;
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(BenchError::Data(format!("line {}: expected 5 columns", lineno + 2)));
        }
        let hour = timestamp_to_hour(parts[0]).ok_or_else(|| {
            BenchError::Data(format!("line {}: bad timestamp '{}'", lineno + 2, parts[0]))
        })?;
        if let Some(prev) = prev_hour {
            if hour <= prev {
                return Err(BenchError::Data(format!(
                    "non-monotone timestamp at {}",
                    parts[0]
                )));
            }
            if hour != prev + 1 {
                return Err(BenchError::Data(format!(
                    "gap before {} ({} missing hours)",
                    parts[0],
                    hour - prev - 1
                )));
            }
        }
        prev_hour = Some(hour);
        let mut vals = [0.0; 4];
        for (i, v) in vals.iter_mut().enumerate() {
            *v = parts[i + 1].trim().parse::<f64>().map_err(|_| {
                BenchError::Data(format!("line {}: bad number '{}'", lineno + 2, parts[i + 1]))
            })?;
        }
        price.push(vals[0]);
        load.push(vals[1]);
        pv.push(vals[2]);
        irr.push(vals[3]);
    }
    let ds = Dataset {
        price,
        load,
        pv,
        irradiance: irr,
        train_days,
        test_days,
        start_dow: 0,
    };
    ds.validate(32)?;
    Ok(ds)
}

/// Synthetic hourly calendar anchored at 2020-01-01T00:00 (a Wednesday; the
/// generator's day-of-week starts at 0 regardless).
pub fn hour_to_timestamp(hour: usize) -> String {
    let days = hour / 24;
    let h = hour % 24;
    let (y, m, d) = civil_from_days(days as i64 + EPOCH_2020);
    format!("{y:04}-{m:02}-{d:02}T{h:02}:00")
}

fn timestamp_to_hour(ts: &str) -> Option<i64> {
    // YYYY-MM-DDTHH:MM
    let bytes = ts.trim();
    if bytes.len() < 16 {
        return None;
    }
    let y: i64 = bytes.get(0..4)?.parse().ok()?;
    let m: u32 = bytes.get(5..7)?.parse().ok()?;
    let d: u32 = bytes.get(8..10)?.parse().ok()?;
    let h: i64 = bytes.get(11..13)?.parse().ok()?;
    if m == 0 || m > 12 || d == 0 || d > 31 || h > 23 {
        return None;
    }
    Some((days_from_civil(y, m, d) - EPOCH_2020) * 24 + h)
}

const EPOCH_2020: i64 = 18262; // days from 1970-01-01 to 2020-01-01

fn days_from_civil(y: i64, m: u32, d: u32) -> i64 {
    let y = if m <= 2 { y - 1 } else { y };
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = y - era * 400;
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146097 + doe - 719468
}

fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719468;
    let era = if z >= 0 { z } else { z - 146096 } / 146097;
    let doe = z - era * 146097;
    let yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}
