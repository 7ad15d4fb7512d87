//! Barrier residual audits and stationary (Newton + sweep) probes.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use jlchemo_core::barriers::{audit, log_space, AuditRow, Family};
use jlchemo_core::csv::{fmt_f64, write_table};
use jlchemo_core::radial::MassProfile;
use jlchemo_core::steady::{solve_stationary_newton, uniqueness_sweep, NewtonReport, SweepReport};
use jlchemo_core::{CRITICAL_MASS, PI};

/// Tolerances of the residual audit.
pub const FD_REL_TOL: f64 = 1e-6;
pub const ANALYTIC_REL_TOL: f64 = 1e-12;

/// Label of a mass in file names: `8pi`, `2.5pi`, or the plain value.
pub fn mass_label(m: f64) -> String {
    let k = m / PI;
    let rounded = (k * 1e6).round() / 1e6;
    if (k - rounded).abs() <= 1e-9 * k.abs().max(1.0) {
        format!("{rounded}pi")
    } else {
        format!("{m}")
    }
}

/// The audit grid: `count` log-spaced parameters, masses `kπ` for
/// `k = 1..=8`, and `points` interior midpoints in `ξ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditGrid {
    pub params: Vec<f64>,
    pub masses: Vec<f64>,
    pub xis: Vec<f64>,
}

impl AuditGrid {
    pub fn new(p_min: f64, p_max: f64, count: usize, masses: Vec<f64>, points: usize) -> Self {
        AuditGrid {
            params: log_space(p_min, p_max, count),
            masses,
            xis: (0..points)
                .map(|k| (k as f64 + 0.5) / points as f64)
                .collect(),
        }
    }

    pub fn standard() -> Self {
        Self::new(1e-3, 1e3, 30, (1..=8).map(|k| k as f64 * PI).collect(), 100)
    }
}

/// Summary of one family's audit.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditSummary {
    pub family: Family,
    pub rows: Vec<AuditRow>,
    pub sign_violations: usize,
    pub max_rel_fd: f64,
    pub max_rel_analytic: f64,
}

impl AuditSummary {
    pub fn pass(&self) -> bool {
        self.sign_violations == 0
            && self.max_rel_fd <= FD_REL_TOL
            && self.max_rel_analytic <= ANALYTIC_REL_TOL
    }
}

pub fn audit_family(family: Family, grid: &AuditGrid) -> Result<AuditSummary> {
    let rows = audit(family, &grid.params, &grid.masses, &grid.xis)?;
    let sign_violations = rows
        .iter()
        .filter(|r| match family {
            Family::Super => !(r.closed > 0.0),
            Family::Sub => !(r.closed < 0.0),
        })
        .count();
    let max_rel_fd = rows.iter().map(|r| r.rel_err_fd()).fold(0.0, f64::max);
    let max_rel_analytic = rows
        .iter()
        .map(|r| r.rel_err_analytic())
        .fold(0.0, f64::max);
    Ok(AuditSummary {
        family,
        rows,
        sign_violations,
        max_rel_fd,
        max_rel_analytic,
    })
}

/// Writes `a,m,xi,residual_closed,residual_fd,abs_err`.
pub fn write_audit_csv(summary: &AuditSummary, path: &Path) -> Result<()> {
    let rows: Vec<Vec<f64>> = summary
        .rows
        .iter()
        .map(|r| vec![r.param, r.m, r.xi, r.closed, r.fd, r.abs_err()])
        .collect();
    let mut buf = Vec::new();
    write_table(
        &mut buf,
        &["a", "m", "xi", "residual_closed", "residual_fd", "abs_err"],
        &rows,
    )?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// A Newton solve followed by the uniqueness sweep of its output.
#[derive(Debug, Clone)]
pub struct SteadyProbe {
    pub mass: f64,
    pub newton: NewtonReport,
    pub sweep: Result<SweepReport, String>,
}

impl SteadyProbe {
    pub fn run(init: &MassProfile) -> Result<Self> {
        let m = init.total_mass();
        let newton = solve_stationary_newton(m, init)?;
        let sweep = uniqueness_sweep(&newton.profile).map_err(|e| e.to_string());
        Ok(SteadyProbe {
            mass: m,
            newton,
            sweep,
        })
    }

    /// The uniqueness claim covers `m ≤ 8π`; above it probes are exploratory.
    pub fn in_scope(&self) -> bool {
        self.mass <= CRITICAL_MASS * (1.0 + 1e-12)
    }

    /// Converged to `mξ` within `10⁻⁸·m` and sandwiched by the sweep.
    pub fn unique(&self) -> bool {
        let m = self.mass;
        self.newton.converged
            && self.newton.distance() < 1e-8 * m
            && matches!(&self.sweep, Ok(s) if s.is_sandwiched() && s.final_gap < 1e-8 * m)
    }

    pub fn newton_csv(&self) -> String {
        let rows: Vec<Vec<f64>> = self
            .newton
            .history
            .iter()
            .map(|s| vec![s.iteration as f64, s.residual_norm, s.distance, s.damping])
            .collect();
        let mut buf = Vec::new();
        write_table(
            &mut buf,
            &["iteration", "residual_norm", "distance", "damping"],
            &rows,
        )
        .expect("writing to memory");
        String::from_utf8(buf).expect("ascii table")
    }

    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("family,param,min_margin,verdict\n");
        if let Ok(rep) = &self.sweep {
            for x in &rep.samples {
                let fam = match x.family {
                    Family::Super => "super",
                    Family::Sub => "sub",
                };
                let verdict = if x.ordered { "ordered" } else { "violated" };
                let _ = writeln!(
                    s,
                    "{fam},{},{},{verdict}",
                    fmt_f64(x.param),
                    fmt_f64(x.min_margin)
                );
            }
        }
        s
    }

    /// Writes `newton_<m>.csv` and `sweep_<m>.csv`; `tag` distinguishes
    /// several probes at one mass.
    pub fn write(&self, dir: &Path, tag: Option<&str>) -> Result<()> {
        let label = match tag {
            Some(t) => format!("{}_{t}", mass_label(self.mass)),
            None => mass_label(self.mass),
        };
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join(format!("newton_{label}.csv")), self.newton_csv())?;
        fs::write(dir.join(format!("sweep_{label}.csv")), self.sweep_csv())?;
        Ok(())
    }

    pub fn describe(&self) -> String {
        let sweep = match &self.sweep {
            Ok(s) => match s.conclusion {
                jlchemo_core::steady::SweepConclusion::Sandwiched => {
                    format!("sandwiched, final gap {:.3e}", s.final_gap)
                }
                jlchemo_core::steady::SweepConclusion::Violated { param, node, .. } => {
                    format!("violated at param {param:.4e}, node {node}")
                }
            },
            Err(e) => format!("not run ({e})"),
        };
        format!(
            "m={} converged={} iterations={} residual={:.3e} distance={:.3e} sweep: {sweep}",
            mass_label(self.mass),
            self.newton.converged,
            self.newton.iterations,
            self.newton.final_residual(),
            self.newton.distance(),
        )
    }
}
