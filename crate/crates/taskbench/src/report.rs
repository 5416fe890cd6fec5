//! Run-directory artifacts: JSON/CSV reports, stored forecasts and model
//! checkpoints, and static SVG plots (regret trajectories and per-task
//! training time).

use std::fs;
use std::path::Path;

use dfcl::ModelPair;
use serde::{Deserialize, Serialize};

use crate::error::{BenchError, Result};
use crate::stream::StreamReport;

fn write(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| BenchError::Io(format!("{}: {e}", parent.display())))?;
    }
    fs::write(path, content).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

pub fn summaries_csv(report: &StreamReport) -> String {
    let mut out = String::from(
        "mode,seed,checkpoint,avg_mae_load,avg_mae_price,avg_regret,rr_percent,fm,train_wall_ms\n",
    );
    for s in &report.summaries {
        out.push_str(&format!(
            "{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
            s.mode, s.seed, s.checkpoint, s.avg_mae_load, s.avg_mae_price, s.avg_regret,
            s.rr_percent, s.fm, s.train_wall_ms
        ));
    }
    out
}

pub fn records_csv(report: &StreamReport) -> String {
    let mut out = String::from(
        "mode,seed,checkpoint,task_index,task_id,mae_load,mae_price,mean_regret,mean_cost,n_days\n",
    );
    for r in &report.records {
        out.push_str(&format!(
            "{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{}\n",
            r.mode, r.seed, r.checkpoint, r.task_index, r.task_id, r.mae_load, r.mae_price,
            r.mean_regret, r.mean_cost, r.n_days
        ));
    }
    out
}

pub fn write_report(dir: &Path, report: &StreamReport) -> Result<()> {
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| BenchError::Io(format!("report serialization: {e}")))?;
    write(&dir.join("report.json"), &json)?;
    write(&dir.join("summaries.csv"), &summaries_csv(report))?;
    write(&dir.join("records.csv"), &records_csv(report))?;
    write(&dir.join("regret_trajectories.svg"), &regret_plot(report))?;
    write(&dir.join("training_time.svg"), &timing_plot(report))?;
    Ok(())
}

pub fn write_train_artifacts(
    dir: &Path,
    mode: &str,
    seed: u64,
    checkpoint: usize,
    log_csv: &str,
    fisher_json: Option<&str>,
) -> Result<()> {
    let base = dir.join(mode).join(format!("seed{seed}")).join(format!("checkpoint{checkpoint}"));
    write(&base.join("trainlog.csv"), log_csv)?;
    if let Some(f) = fisher_json {
        write(&base.join("fisher.json"), f)?;
    }
    Ok(())
}

pub fn write_checkpoint(dir: &Path, mode: &str, seed: u64, checkpoint: usize, pair: &ModelPair) -> Result<()> {
    let base = dir.join(mode).join(format!("seed{seed}")).join(format!("checkpoint{checkpoint}"));
    write(&base.join("price_model.json"), &pair.price.to_json())?;
    write(&base.join("load_model.json"), &pair.load.to_json())?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
pub struct StoredForecasts {
    pub price: Vec<Vec<f64>>,
    pub load: Vec<Vec<f64>>,
}

pub fn write_forecasts(
    dir: &Path,
    mode: &str,
    seed: u64,
    checkpoint: usize,
    task_index: usize,
    forecasts: &[(Vec<f64>, Vec<f64>)],
) -> Result<()> {
    let stored = StoredForecasts {
        price: forecasts.iter().map(|(p, _)| p.clone()).collect(),
        load: forecasts.iter().map(|(_, l)| l.clone()).collect(),
    };
    let base = dir.join(mode).join(format!("seed{seed}")).join(format!("checkpoint{checkpoint}"));
    let json = serde_json::to_string(&stored)
        .map_err(|e| BenchError::Io(format!("forecast serialization: {e}")))?;
    write(&base.join(format!("forecasts_task{task_index}.json")), &json)
}

pub fn read_forecasts(path: &Path) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
    let text =
        fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    let stored: StoredForecasts =
        serde_json::from_str(&text).map_err(|e| BenchError::Io(format!("forecast parse: {e}")))?;
    Ok(stored.price.into_iter().zip(stored.load).collect())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Average-regret trajectory per mode (mean over seeds) across checkpoints.
pub fn regret_plot(report: &StreamReport) -> String {
    let mut modes: Vec<String> = report.summaries.iter().map(|s| s.mode.clone()).collect();
    modes.sort();
    modes.dedup();
    let max_k = report.summaries.iter().map(|s| s.checkpoint).max().unwrap_or(0);
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for m in &modes {
        let mut vals = Vec::new();
        for k in 0..=max_k {
            let pts: Vec<f64> = report
                .summaries
                .iter()
                .filter(|s| &s.mode == m && s.checkpoint == k)
                .map(|s| s.avg_regret)
                .collect();
            if !pts.is_empty() {
                vals.push(pts.iter().sum::<f64>() / pts.len() as f64);
            }
        }
        series.push((m.clone(), vals));
    }
    line_chart("Average regret after each task", "checkpoint", "regret", &series)
}

/// Per-task training wall time per mode (mean over seeds).
pub fn timing_plot(report: &StreamReport) -> String {
    let mut modes: Vec<String> = report.summaries.iter().map(|s| s.mode.clone()).collect();
    modes.sort();
    modes.dedup();
    let max_k = report.summaries.iter().map(|s| s.checkpoint).max().unwrap_or(0);
    let mut series: Vec<(String, Vec<f64>)> = Vec::new();
    for m in &modes {
        let mut vals = Vec::new();
        for k in 0..=max_k {
            let pts: Vec<f64> = report
                .summaries
                .iter()
                .filter(|s| &s.mode == m && s.checkpoint == k)
                .map(|s| s.train_wall_ms as f64 / 1000.0)
                .collect();
            if !pts.is_empty() {
                vals.push(pts.iter().sum::<f64>() / pts.len() as f64);
            }
        }
        series.push((m.clone(), vals));
    }
    line_chart("Per-task training time", "checkpoint", "seconds", &series)
}

fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(String, Vec<f64>)]) -> String {
    let (w, h, ml, mb, mt, mr) = (640.0, 400.0, 70.0, 50.0, 40.0, 160.0);
    let plot_w = w - ml - mr;
    let plot_h = h - mt - mb;
    let max_n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(1).max(2);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (_, v) in series {
        for &x in v {
            lo = lo.min(x);
            hi = hi.max(x);
        }
    }
    if !lo.is_finite() {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi - lo).abs() < 1e-12 {
        hi = lo + 1.0;
    }
    let pad = 0.08 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let xf = |i: usize| ml + plot_w * i as f64 / (max_n - 1) as f64;
    let yf = |v: f64| mt + plot_h * (1.0 - (v - lo) / (hi - lo));

    let mut svg = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">
<rect width="{w}" height="{h}" fill="white"/>
<text x="{:.0}" y="20" text-anchor="middle" font-size="14">{title}</text>
<line x1="{ml}" y1="{:.0}" x2="{:.0}" y2="{:.0}" stroke="black"/>
<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{:.0}" stroke="black"/>
<text x="{:.0}" y="{:.0}" text-anchor="middle">{x_label}</text>
<text x="18" y="{:.0}" text-anchor="middle" transform="rotate(-90 18 {:.0})">{y_label}</text>
"#,
        ml + plot_w / 2.0,
        h - mb,
        w - mr,
        h - mb,
        h - mb,
        ml + plot_w / 2.0,
        h - 12.0,
        mt + plot_h / 2.0,
        mt + plot_h / 2.0,
    );
    for (i, tick) in (0..5).enumerate() {
        let v = lo + (hi - lo) * tick as f64 / 4.0;
        let y = yf(v);
        svg.push_str(&format!(
            r#"<line x1="{:.0}" y1="{y:.0}" x2="{ml}" y2="{y:.0}" stroke="black"/><text x="{:.0}" y="{:.0}" text-anchor="end">{v:.1}</text>
"#,
            ml - 4.0,
            ml - 8.0,
            y + 4.0
        ));
        let _ = i;
    }
    for i in 0..max_n {
        let x = xf(i);
        svg.push_str(&format!(
            r#"<text x="{x:.0}" y="{:.0}" text-anchor="middle">{}</text>
"#,
            h - mb + 16.0,
            i + 1
        ));
    }
    for (si, (name, vals)) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        if vals.len() > 1 {
            let pts: Vec<String> =
                vals.iter().enumerate().map(|(i, &v)| format!("{:.1},{:.1}", xf(i), yf(v))).collect();
            svg.push_str(&format!(
                r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>
"#,
                pts.join(" ")
            ));
        }
        for (i, &v) in vals.iter().enumerate() {
            svg.push_str(&format!(
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>
"#,
                xf(i),
                yf(v)
            ));
        }
        let ly = mt + 16.0 * si as f64;
        svg.push_str(&format!(
            r#"<rect x="{:.0}" y="{ly:.0}" width="12" height="12" fill="{color}"/><text x="{:.0}" y="{:.0}">{name}</text>
"#,
            w - mr + 10.0,
            w - mr + 26.0,
            ly + 10.0
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
