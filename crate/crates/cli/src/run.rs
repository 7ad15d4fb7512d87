//! One simulation with its written artifacts and summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use jlchemo_core::barriers::{default_derivative_bound, find_dominating_super, SuperBarrier};
use jlchemo_core::csv::{fmt_f64, write_table};
use jlchemo_core::energy::{audit_decay, DecayAudit};
use jlchemo_core::radial::write_profile_csv;
use jlchemo_core::solver::{
    barrier_excess, bound_gradient_v, simulate, SimulationTrace, TRACE_HEADER,
};
use jlchemo_core::steady::{longtime_convergence, LongtimeReport};
use jlchemo_core::CRITICAL_MASS;

use crate::config::ExperimentConfig;

/// Barrier confinement after the first positive snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Confinement {
    pub barrier: SuperBarrier,
    /// Snapshot time at which the barrier was fitted.
    pub fitted_at: f64,
    /// `max (M − W̄_a)⁺` over later snapshots.
    pub excess: f64,
    /// `sup M/ξ` over trace rows at or after `fitted_at`.
    pub sup_m_over_xi: f64,
    pub pass: bool,
}

impl Confinement {
    /// The bound `m(a+1)/a` on `M/ξ` implied by the barrier.
    pub fn m_over_xi_bound(&self) -> f64 {
        self.barrier.sup_over_xi()
    }
}

/// Fits `W̄_a` to the first snapshot after `t = 0` and checks that every
/// later snapshot stays below it. Only meaningful for `m ≤ 8π`.
pub fn confinement(trace: &SimulationTrace) -> Option<Result<Confinement, String>> {
    let m = trace.mass;
    if m > CRITICAL_MASS {
        return None;
    }
    let snap = trace.snapshots.iter().find(|s| s.t > 0.0)?;
    let fit = default_derivative_bound(&snap.profile)
        .and_then(|c| find_dominating_super(&snap.profile, c));
    let barrier = match fit {
        Ok(b) => b,
        Err(e) => return Some(Err(e.to_string())),
    };
    let excess = barrier_excess(trace, &barrier, snap.t);
    let sup_m_over_xi = trace
        .rows
        .iter()
        .filter(|r| r.t >= snap.t)
        .map(|r| r.sup_m_over_xi)
        .fold(0.0, f64::max);
    let pass = excess <= 1e-10 * m && sup_m_over_xi <= barrier.sup_over_xi() * (1.0 + 1e-10);
    Some(Ok(Confinement {
        barrier,
        fitted_at: snap.t,
        excess,
        sup_m_over_xi,
        pass,
    }))
}

/// Ordered `key=value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Summary(pub Vec<(String, String)>);

impl Summary {
    pub fn push(&mut self, key: &str, value: impl Into<String>) {
        self.0.push((key.to_string(), value.into()));
    }

    pub fn num(&mut self, key: &str, value: f64) {
        self.push(key, fmt_f64(value));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}

/// Everything a simulation run produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace: SimulationTrace,
    pub audit: DecayAudit,
    pub longtime: LongtimeReport,
    pub confinement: Option<Result<Confinement, String>>,
    pub summary: Summary,
}

impl RunOutcome {
    /// Whether the run met the configured expectation (vacuous if none).
    pub fn meets(&self, config: &ExperimentConfig) -> bool {
        let verdict_ok = config.expect.is_none_or(|e| e.matches(&self.trace.verdict));
        let confined = !matches!(&self.confinement, Some(Ok(c)) if !c.pass)
            && !matches!(&self.confinement, Some(Err(_)));
        verdict_ok && confined
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

pub fn write_trace(trace: &SimulationTrace, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = trace.rows.iter().map(|r| r.as_row()).collect();
    let mut w = create(&dir.join("trace.csv"))?;
    write_table(&mut w, &TRACE_HEADER, &rows)?;
    w.flush()?;
    for s in &trace.snapshots {
        let mut w = create(&dir.join(format!("snap_{}.csv", s.index)))?;
        write_profile_csv(&s.profile, &mut w)?;
        w.flush()?;
    }
    Ok(())
}

pub fn write_audit(audit: &DecayAudit, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = audit
        .rows
        .iter()
        .map(|r| vec![r.t, r.energy, r.dissipation, r.dfdt_est, r.budget_residual])
        .collect();
    let mut w = create(path)?;
    write_table(
        &mut w,
        &["t", "F", "D", "dFdt_est", "budget_residual"],
        &rows,
    )?;
    w.flush()?;
    Ok(())
}

fn summarize(config: &ExperimentConfig, out: &RunOutcome) -> Summary {
    let trace = &out.trace;
    let mut s = Summary::default();
    s.num("mass", config.mass);
    s.push("grid_n", config.n.to_string());
    s.num("grid_gamma", config.gamma);
    s.push("initial", config.initial.describe());
    s.push("seed", config.seed.to_string());
    s.push("verdict", trace.verdict.name());
    s.num("final_time", trace.final_time());
    s.push("steps", (trace.rows.len() - 1).to_string());
    s.push("rejected_steps", trace.rejected_steps.to_string());
    s.push("clipped_steps", trace.clipped_steps.to_string());
    s.num("final_sup_distance", out.longtime.final_rel_distance());
    match out.longtime.decay_rate {
        Some(r) => s.num("decay_rate", r),
        None => s.push("decay_rate", "none"),
    }
    s.num("energy_initial", trace.rows[0].energy);
    s.num("energy_final", trace.rows.last().unwrap().energy);
    s.num("energy_max_jump_rel", out.audit.max_jump_rel);
    s.num("energy_budget_residual", out.audit.budget_residual_rel);
    s.num("grad_v_bound", bound_gradient_v(trace));
    match &out.confinement {
        None => {
            s.push("barrier_a", "none");
            s.push("barrier_confinement", "not_applicable");
        }
        Some(Err(e)) => {
            s.push("barrier_a", "none");
            s.push("barrier_confinement", format!("fail ({e})"));
        }
        Some(Ok(c)) => {
            s.num("barrier_a", c.barrier.a());
            s.num("barrier_fitted_at", c.fitted_at);
            s.num("barrier_excess", c.excess);
            s.num("sup_m_over_xi_after_fit", c.sup_m_over_xi);
            s.num("barrier_m_over_xi_bound", c.m_over_xi_bound());
            s.num(
                "barrier_grad_v_bound",
                (c.m_over_xi_bound() + trace.mass) / (2.0 * std::f64::consts::PI),
            );
            s.push("barrier_confinement", if c.pass { "pass" } else { "fail" });
        }
    }
    match trace.verdict.blowup() {
        Some(b) => {
            s.num("blowup_time", b.time);
            s.num("blowup_estimated_time", b.estimated_time);
            s.num("peak_value", b.peak_value);
            s.push("peak_node", b.peak_node.to_string());
            s.num("peak_xi", b.peak_xi);
        }
        None => s.push("blowup_time", "none"),
    }
    s
}

/// Runs a configured simulation without touching the filesystem.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome> {
    let init = config.initial_profile();
    let trace = simulate(&config.scheme, &init)?;
    let audit = audit_decay(&trace);
    let longtime = longtime_convergence(&trace);
    let confinement = confinement(&trace);
    let mut out = RunOutcome {
        trace,
        audit,
        longtime,
        confinement,
        summary: Summary::default(),
    };
    out.summary = summarize(config, &out);
    Ok(out)
}

/// Runs a simulation and writes `trace.csv`, `snap_<i>.csv`,
/// `energy_audit.csv` and `summary.txt` into the configured directory.
pub fn run_simulation(config: &ExperimentConfig) -> Result<RunOutcome> {
    let out = execute(config)?;
    let dir = &config.out_dir;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_trace(&out.trace, dir)?;
    write_audit(&out.audit, &dir.join("energy_audit.csv"))?;
    out.summary.write(&dir.join("summary.txt"))?;
    Ok(out)
}
