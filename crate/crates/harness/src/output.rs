//! Experiment artifacts: CSVs (the ground truth), an SVG plot, and the resolved config.
//!
//! The regret CSVs carry no wall-clock data, so they are byte-identical across
//! repeated executions; timings live in their own file.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::ExperimentConfig;
use crate::error::{IoContext, Result};
use crate::experiment::{bound_checks, AggregateResult};

pub const REGRET_MEAN: &str = "regret_mean.csv";
pub const REGRET_RUNS: &str = "regret_runs.csv";
pub const TIMINGS: &str = "timings.csv";
pub const BOUNDS: &str = "bounds.csv";
pub const PLOT: &str = "regret.svg";
pub const RESOLVED_CONFIG: &str = "config.resolved.toml";

pub fn regret_mean_csv(result: &AggregateResult) -> String {
    let mut s = String::from("t");
    for l in &result.labels {
        let _ = write!(s, ",{l}_mean,{l}_se");
    }
    s.push('\n');
    for t in 0..result.horizon {
        let _ = write!(s, "{}", t + 1);
        for (m, e) in result.mean_regret.iter().zip(&result.stderr_regret) {
            let _ = write!(s, ",{},{}", m[t], e[t]);
        }
        s.push('\n');
    }
    s
}

pub fn regret_runs_csv(result: &AggregateResult) -> String {
    let mut s = String::from("run,seed,policy,t,arm,inst_regret,cum_regret\n");
    for r in &result.runs {
        for (label, p) in result.labels.iter().zip(&r.policies) {
            let tr = &p.trace;
            for t in 0..tr.len() {
                let _ = writeln!(
                    s,
                    "{},{},{label},{},{},{},{}",
                    r.run,
                    r.seed,
                    t + 1,
                    tr.chosen_arms()[t],
                    tr.per_step_regret()[t],
                    tr.cumulative_regret()[t]
                );
            }
        }
    }
    s
}

pub fn timings_csv(result: &AggregateResult) -> String {
    let mut s = String::from("run,policy,mean_step_ms\n");
    for r in &result.runs {
        for (label, p) in result.labels.iter().zip(&r.policies) {
            let _ = writeln!(s, "{},{label},{:.6}", r.run, p.trace.mean_step_ms());
        }
    }
    s
}

pub fn bounds_csv(result: &AggregateResult) -> String {
    let mut s = String::from("run,policy,dimension,norm_bound,final_regret,bound,satisfied\n");
    for (r, checks) in result.runs.iter().zip(bound_checks(result)) {
        for ((label, p), c) in result.labels.iter().zip(&r.policies).zip(checks) {
            let _ = writeln!(
                s,
                "{},{label},{},{},{},{},{}",
                r.run, p.dimension, p.config.norm_bound, c.final_regret, c.bound_value, c.satisfied
            );
        }
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Mean cumulative regret per policy with a ±1 standard-error band.
pub fn regret_svg(result: &AggregateResult) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (70.0, 160.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let t_max = result.horizon.max(2) as f64;
    let y_max = result
        .mean_regret
        .iter()
        .zip(&result.stderr_regret)
        .flat_map(|(m, e)| m.iter().zip(e).map(|(a, b)| a + b))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let x = |t: usize| left + pw * (t as f64 - 1.0) / (t_max - 1.0);
    let y = |v: f64| top + ph * (1.0 - v / y_max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<g stroke="#333" fill="none"><line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}"/></g>"##,
        top + ph,
        left + pw,
        top + ph,
        top + ph
    );
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{v:.1}</text>"#,
            left - 6.0,
            y(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">t (1..{})</text>"#,
        left + pw / 2.0,
        h - 15.0,
        result.horizon
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{:.2}" font-size="12" transform="rotate(-90 15 {:.2})" text-anchor="middle">cumulative regret</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (p, label) in result.labels.iter().enumerate() {
        let color = PALETTE[p % PALETTE.len()];
        let mean = &result.mean_regret[p];
        let se = &result.stderr_regret[p];
        let mut band = String::new();
        for t in 0..result.horizon {
            let _ = write!(band, "{:.2},{:.2} ", x(t + 1), y(mean[t] + se[t]));
        }
        for t in (0..result.horizon).rev() {
            let _ = write!(band, "{:.2},{:.2} ", x(t + 1), y((mean[t] - se[t]).max(0.0)));
        }
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        );
        let line: Vec<String> = (0..result.horizon)
            .map(|t| format!("{:.2},{:.2}", x(t + 1), y(mean[t])))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            line.join(" ")
        );
        let ly = top + 20.0 * p as f64 + 10.0;
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12">{label}</text>"#,
            left + pw + 15.0,
            left + pw + 35.0,
            left + pw + 40.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn resolved_config_text(cfg: &ExperimentConfig, result: &AggregateResult) -> Result<String> {
    let seeds: Vec<String> = result.seeds.iter().map(u64::to_string).collect();
    Ok(format!(
        "# config_hash = {}\n# run_seeds = [{}]\n{}",
        result.config_hash,
        seeds.join(", "),
        cfg.resolved_toml()?
    ))
}

/// Writes every artifact into `dir` (created if missing) and returns the paths.
pub fn emit_outputs(cfg: &ExperimentConfig, result: &AggregateResult, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).at(dir)?;
    let files = [
        (REGRET_MEAN, regret_mean_csv(result)),
        (REGRET_RUNS, regret_runs_csv(result)),
        (TIMINGS, timings_csv(result)),
        (BOUNDS, bounds_csv(result)),
        (PLOT, regret_svg(result)),
        (RESOLVED_CONFIG, resolved_config_text(cfg, result)?),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).at(&path)?;
        written.push(path);
    }
    Ok(written)
}
