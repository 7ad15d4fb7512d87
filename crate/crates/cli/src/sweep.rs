//! Parameter sweeps over one configuration key.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use jlchemo_core::csv::fmt_f64;
use rayon::prelude::*;
use toml::Value;

use crate::config::{parse_number, ExperimentConfig};
use crate::run::run_simulation;

pub const SWEEP_HEADER: &str =
    "param,verdict,final_time,final_sup_distance,energy_budget_residual,barrier_a,blowup_time,error";

/// One row of `sweep.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub verdict: String,
    pub final_time: String,
    pub final_sup_distance: String,
    pub energy_budget_residual: String,
    pub barrier_a: String,
    pub blowup_time: String,
    pub error: String,
}

impl SweepRow {
    fn failed(param: f64, error: String) -> Self {
        let na = || "none".to_string();
        SweepRow {
            param,
            verdict: "error".into(),
            final_time: na(),
            final_sup_distance: na(),
            energy_budget_residual: na(),
            barrier_a: na(),
            blowup_time: na(),
            error: error.replace([',', '\n'], ";"),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            fmt_f64(self.param),
            self.verdict,
            self.final_time,
            self.final_sup_distance,
            self.energy_budget_residual,
            self.barrier_a,
            self.blowup_time,
            self.error
        )
    }
}

/// Parses a comma-separated axis; an empty string is an empty axis.
pub fn parse_axis(values: &str) -> Result<Vec<f64>, String> {
    values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_number(s).ok_or_else(|| format!("`{s}` is not a number")))
        .collect()
}

/// The TOML value for an axis entry; integral keys get integers.
pub fn axis_value(key: &str, x: f64) -> Value {
    let integral = matches!(key, "grid.n" | "seed");
    if integral && x.fract() == 0.0 && x >= 0.0 {
        Value::Integer(x as i64)
    } else {
        Value::Float(x)
    }
}

/// Runs `template` once per axis value, each in `out/run_<k>`, and merges
/// the summaries into `out/sweep.csv` ordered by parameter. Failures are
/// recorded in their row and never stop sibling runs.
pub fn run_sweep(
    template: &ExperimentConfig,
    key: &str,
    axis: &[f64],
    out: &Path,
) -> Result<Vec<SweepRow>> {
    let mut axis = axis.to_vec();
    axis.sort_by(f64::total_cmp);
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let rows: Vec<SweepRow> = axis
        .par_iter()
        .enumerate()
        .map(|(k, &x)| {
            let dir = out.join(format!("run_{k}"));
            let cfg = template.with(key, axis_value(key, x)).and_then(|c| {
                c.with(
                    "output.dir",
                    Value::String(dir.to_string_lossy().into_owned()),
                )
            });
            let cfg = match cfg {
                Ok(c) => c,
                Err(e) => return SweepRow::failed(x, e.to_string()),
            };
            match run_simulation(&cfg) {
                Ok(run) => {
                    let get = |k: &str| run.summary.get(k).unwrap_or("none").to_string();
                    SweepRow {
                        param: x,
                        verdict: get("verdict"),
                        final_time: get("final_time"),
                        final_sup_distance: get("final_sup_distance"),
                        energy_budget_residual: get("energy_budget_residual"),
                        barrier_a: get("barrier_a"),
                        blowup_time: get("blowup_time"),
                        error: String::new(),
                    }
                }
                Err(e) => SweepRow::failed(x, format!("{e:#}")),
            }
        })
        .collect();
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.render());
        text.push('\n');
    }
    let path = out.join("sweep.csv");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(rows)
}
