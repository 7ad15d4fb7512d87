//! Monotone time stepping for `M_t = 4ξM_ξξ + c M_ξ`, `c = (M − mξ)/π`.
//!
//! Each step solves
//!
//! ```text
//! (I − Δt·ε D₂) Mⁿ⁺¹ = Mⁿ + Δt·(c⁺ D₊Mⁿ + c⁻ D₋Mⁿ),   c = (Mⁿ − mξ)/π,
//! ```
//!
//! with `M(0) = 0`, `M(1) = m` imposed exactly and `ε = 4ξ` (plain upwinding)
//! or `ε = (4ξ − |c|h_up/2)⁺` (see [`Advection`]). The left side is an
//! M-matrix and, under the advective step limit returned by [`stable_dt`], the
//! right side is nondecreasing in every nodal value of `Mⁿ` whenever `Mⁿ` is
//! nondecreasing in `ξ`. For plain upwinding ordered data therefore stay
//! ordered, the discrete form of the comparison principle. The corrected
//! coefficient depends on `Mⁿ` as well; ordering is then preserved as long as
//! `Δt·|D₂Mⁿ⁺¹|·h_up/(2π)` stays below the unused part of the Courant budget,
//! which holds comfortably at the default `cfl`. The same limit keeps the
//! cell slopes `πu` nonnegative.

use std::sync::Arc;

use thiserror::Error;

use crate::barriers::Profile;
use crate::barriers::SuperBarrier;
use crate::energy::energy_report;
use crate::radial::numerics::d2_weights;
use crate::radial::{density_from_mass, second_moment, Grid, MassProfile};
use crate::PI;

/// Tolerance (relative to `m`) below which monotonicity defects are left alone.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("time step {dt} exceeds the advective limit {limit}; shrink dt")]
    CflViolation { dt: f64, limit: f64 },
    #[error(
        "time step {dt} exceeds the curvature limit {limit} of the corrected scheme; shrink dt"
    )]
    CurvatureLimit { dt: f64, limit: f64 },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("tridiagonal solve failed (pivot {0})")]
    SolveFailed(f64),
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("initial profile does not live on the configured grid")]
    GridMismatch,
    #[error("profiles have different total mass")]
    MassMismatch,
    #[error("initial data are not ordered at node {node} (lower exceeds upper by {gap})")]
    NotOrdered { node: usize, gap: f64 },
}

/// Treatment of the advective term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Advection {
    /// Plain first-order upwinding; its numerical diffusion `|c|h/2` is kept.
    Upwind,
    /// Upwinding with the numerical diffusion `|c|h_up/2` subtracted from the
    /// implicit diffusion coefficient (floored at zero). Second-order
    /// consistent wherever the cell Péclet number `|c|h_up/(8ξ)` is below one.
    #[default]
    Corrected,
}

/// Time-stepping parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeConfig {
    pub grid: Arc<Grid>,
    pub dt0: f64,
    /// Fraction of the advective step limit actually used, in `(0, 1]`.
    pub cfl: f64,
    pub t_end: f64,
    /// Time between profile snapshots.
    pub snapshot_every: f64,
    /// `None` means `10⁶·m/π`.
    pub u_blowup_threshold: Option<f64>,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Factor by which the step may grow after an accepted step.
    pub growth: f64,
    /// A step is rejected when `sup u` grows by more than this factor.
    pub spike_factor: f64,
    pub advection: Advection,
}

impl SchemeConfig {
    pub fn new(grid: Arc<Grid>) -> Self {
        SchemeConfig {
            grid,
            dt0: 1e-6,
            cfl: 0.9,
            t_end: 10.0,
            snapshot_every: 0.5,
            u_blowup_threshold: None,
            dt_min: 1e-13,
            dt_max: 1e-2,
            growth: 1.2,
            spike_factor: 2.0,
            advection: Advection::Corrected,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::InvalidConfig(msg.to_string()));
        if !(self.dt_min > 0.0 && self.dt_min.is_finite()) {
            return bad("dt_min must be positive");
        }
        if !(self.dt0 > self.dt_min && self.dt0.is_finite()) {
            return bad("dt0 must exceed dt_min");
        }
        if !(self.dt_max >= self.dt0 && self.dt_max.is_finite()) {
            return bad("dt_max must be at least dt0");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return bad("cfl must lie in (0, 1]");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be positive");
        }
        if !(self.snapshot_every > 0.0) {
            return bad("snapshot_every must be positive");
        }
        if let Some(th) = self.u_blowup_threshold {
            if !(th > 0.0) {
                return bad("u_blowup_threshold must be positive");
            }
        }
        if !(self.growth >= 1.0 && self.growth.is_finite()) {
            return bad("growth must be >= 1");
        }
        if !(self.spike_factor > 1.0) {
            return bad("spike_factor must exceed 1");
        }
        Ok(())
    }

    pub fn threshold_for(&self, m: f64) -> f64 {
        self.u_blowup_threshold.unwrap_or(1e6 * m / PI)
    }
}

/// Nodal wave speeds split into `(c⁺, |c⁻|)`; zero at the Dirichlet nodes.
fn split_speeds(profile: &MassProfile) -> (Vec<f64>, Vec<f64>) {
    let n = profile.grid().intervals();
    let mut pos = vec![0.0; n + 1];
    let mut neg = vec![0.0; n + 1];
    for (i, e) in profile.excess().into_iter().enumerate().take(n).skip(1) {
        let c = e / PI;
        if c > 0.0 {
            pos[i] = c;
        } else {
            neg[i] = -c;
        }
    }
    (pos, neg)
}

fn limit_from_speeds(grid: &Grid, pos: &[f64], neg: &[f64]) -> f64 {
    (0..grid.intervals())
        .map(|i| {
            let s = pos[i] + neg[i + 1];
            if s > 0.0 {
                grid.spacing(i) / s
            } else {
                f64::INFINITY
            }
        })
        .fold(f64::INFINITY, f64::min)
}

/// Largest step for which the upwind update is monotone:
/// `Δt·(c_i⁺ + |c_{i+1}⁻|) ≤ ξ_{i+1} − ξ_i` on every cell.
pub fn stable_dt(profile: &MassProfile) -> f64 {
    let (pos, neg) = split_speeds(profile);
    limit_from_speeds(profile.grid(), &pos, &neg)
}

/// `P coth P − P` for `P ≥ 0`: the share of the physical diffusion left after
/// removing the numerical diffusion of the upwind stencil, so that the total
/// equals the exponentially fitted value `4ξ·P coth P`.
fn fitted_factor(p: f64) -> f64 {
    if p < 1e-3 {
        1.0 - p + p * p / 3.0 - p.powi(4) / 45.0
    } else {
        p / p.tanh() - p
    }
}

/// Largest `Δt` with `Δt·(|c_i|/h_up + h_up·|D₂M_i|/(2π)) ≤ 1` at every
/// interior node, `c` taken from `lagged` and `D₂M` from `current`.
///
/// The corrected coefficient varies with `Mⁿ`; this bound keeps the diagonal
/// sensitivity of a step to `Mⁿ_i` nonnegative, which ordering preservation
/// needs on top of the Courant limit.
fn curvature_limit(x: &[f64], lagged: &[f64], current: &[f64], m: f64) -> f64 {
    let n = x.len() - 1;
    let mut limit = f64::INFINITY;
    for i in 1..n {
        let c = (lagged[i] - m * x[i]) / PI;
        let h_up = if c > 0.0 {
            x[i + 1] - x[i]
        } else {
            x[i] - x[i - 1]
        };
        let (wm, w0, wp) = d2_weights(x, i);
        let d2 = wm * current[i - 1] + w0 * current[i] + wp * current[i + 1];
        let rate = c.abs() / h_up + h_up * d2.abs() / (2.0 * PI);
        if rate > 0.0 {
            limit = limit.min(1.0 / rate);
        }
    }
    limit
}

/// Step limit of the given scheme at `profile`: the Courant limit, and for
/// [`Advection::Corrected`] also the curvature limit evaluated on `profile`
/// (the step itself re-checks it on the new state).
pub fn step_limit(profile: &MassProfile, advection: Advection) -> f64 {
    let courant = stable_dt(profile);
    match advection {
        Advection::Upwind => courant,
        Advection::Corrected => {
            let v = profile.values();
            courant.min(curvature_limit(
                profile.grid().nodes(),
                v,
                v,
                profile.total_mass(),
            ))
        }
    }
}

/// Joint step limit for two profiles advanced together: the limit for any
/// convex combination of them.
pub fn stable_dt_pair(a: &MassProfile, b: &MassProfile) -> f64 {
    let (pa, na) = split_speeds(a);
    let (pb, nb) = split_speeds(b);
    let pos: Vec<f64> = pa.iter().zip(&pb).map(|(x, y)| x.max(*y)).collect();
    let neg: Vec<f64> = na.iter().zip(&nb).map(|(x, y)| x.max(*y)).collect();
    limit_from_speeds(a.grid(), &pos, &neg)
}

/// Result of one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub profile: MassProfile,
    /// True if a monotonicity defect above `10⁻¹²·m` had to be clipped.
    pub clipped: bool,
}

/// Advances the profile by `dt` with the default [`Advection::Corrected`] scheme.
pub fn step(profile: &MassProfile, dt: f64) -> Result<StepOutcome, SolverError> {
    step_with(profile, dt, Advection::Corrected)
}

/// Advances the profile by `dt` with the given advection treatment.
pub fn step_with(
    profile: &MassProfile,
    dt: f64,
    advection: Advection,
) -> Result<StepOutcome, SolverError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SolverError::InvalidStep(dt));
    }
    let limit = stable_dt(profile);
    if dt > limit * (1.0 + 1e-12) {
        return Err(SolverError::CflViolation { dt, limit });
    }
    let grid = profile.grid();
    let x = grid.nodes();
    let n = grid.intervals();
    let m = profile.total_mass();
    let mv = profile.values();

    // interior unknowns 1..n-1
    let k = n - 1;
    let mut lower = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut upper = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..n {
        let c = (mv[i] - m * x[i]) / PI;
        let j = i - 1;
        let adv = if c > 0.0 {
            c * (mv[i + 1] - mv[i]) / (x[i + 1] - x[i])
        } else {
            c * (mv[i] - mv[i - 1]) / (x[i] - x[i - 1])
        };
        let (wm, w0, wp) = d2_weights(x, i);
        let mut eps = 4.0 * x[i];
        if advection == Advection::Corrected {
            let h_up = if c > 0.0 {
                x[i + 1] - x[i]
            } else {
                x[i] - x[i - 1]
            };
            eps *= fitted_factor(0.5 * c.abs() * h_up / eps);
        }
        let s = dt * eps;
        lower[j] = -s * wm;
        diag[j] = 1.0 - s * w0;
        upper[j] = -s * wp;
        rhs[j] = mv[i] + dt * adv;
    }
    // M(0) = 0 contributes nothing; move M(1) = m to the right side
    rhs[k - 1] -= upper[k - 1] * m;

    let interior = solve_tridiagonal(&lower, &diag, &upper, &rhs)?;
    let mut values = Vec::with_capacity(n + 1);
    values.push(0.0);
    values.extend(interior);
    values.push(m);

    if advection == Advection::Corrected {
        let limit = curvature_limit(x, mv, &values, m);
        if dt > limit * (1.0 + 1e-12) {
            return Err(SolverError::CurvatureLimit { dt, limit });
        }
    }

    let tol = MONOTONE_TOL * m;
    let defect = values
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0f64, f64::max)
        .max(values.iter().map(|v| v - m).fold(0.0, f64::max))
        .max(values.iter().map(|v| -v).fold(0.0, f64::max));
    let clipped = defect > tol;
    if clipped {
        let mut run: f64 = 0.0;
        for v in values.iter_mut().take(n) {
            run = run.max(*v).min(m);
            *v = run;
        }
        values[0] = 0.0;
    }
    Ok(StepOutcome {
        profile: MassProfile::from_raw(grid.clone(), values, m),
        clipped,
    })
}

/// Thomas algorithm; fails on a vanishing or non-finite pivot.
pub(crate) fn solve_tridiagonal(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Result<Vec<f64>, SolverError> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut piv = diag[0];
    if !(piv.abs() > 1e-300) || !piv.is_finite() {
        return Err(SolverError::SolveFailed(piv));
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..n {
        piv = diag[i] - lower[i] * c[i - 1];
        if !(piv.abs() > 1e-300) || !piv.is_finite() {
            return Err(SolverError::SolveFailed(piv));
        }
        c[i] = upper[i] / piv;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::SolveFailed(f64::NAN));
    }
    Ok(out)
}

/// Per-step diagnostics recorded in the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub t: f64,
    /// Step that produced this state (0 for the initial row).
    pub dt: f64,
    pub sup_u: f64,
    pub sup_m_over_xi: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub second_moment: f64,
}

pub const TRACE_HEADER: [&str; 7] = [
    "t",
    "dt",
    "sup_u",
    "sup_M_over_xi",
    "energy",
    "dissipation",
    "second_moment",
];

impl Diagnostics {
    pub fn of(profile: &MassProfile, t: f64, dt: f64) -> Self {
        let u = density_from_mass(profile);
        let sup_u = u.values().iter().fold(0.0f64, |a, &b| a.max(b));
        let e = energy_report(profile);
        Diagnostics {
            t,
            dt,
            sup_u,
            sup_m_over_xi: profile.sup_over_xi(),
            energy: e.energy,
            dissipation: e.dissipation,
            second_moment: second_moment(profile).value,
        }
    }

    pub fn as_row(&self) -> Vec<f64> {
        vec![
            self.t,
            self.dt,
            self.sup_u,
            self.sup_m_over_xi,
            self.energy,
            self.dissipation,
            self.second_moment,
        ]
    }

    pub fn from_row(row: &[f64]) -> Option<Self> {
        if row.len() != 7 {
            return None;
        }
        Some(Diagnostics {
            t: row[0],
            dt: row[1],
            sup_u: row[2],
            sup_m_over_xi: row[3],
            energy: row[4],
            dissipation: row[5],
            second_moment: row[6],
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub profile: MassProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlowupReason {
    Threshold,
    StepFloor,
}

/// Evidence of a (numerical) blowup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowupReport {
    pub reason: BlowupReason,
    /// Time at which the detector fired.
    pub time: f64,
    /// Blowup time extrapolated from the last two samples assuming
    /// `1/sup u` decays linearly; equals `time` when not extrapolable.
    pub estimated_time: f64,
    pub peak_value: f64,
    pub peak_node: usize,
    pub peak_xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Completed,
    BlowupDetected(BlowupReport),
    StepFloorReached(BlowupReport),
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Completed => "completed",
            Verdict::BlowupDetected(_) => "blowup_detected",
            Verdict::StepFloorReached(_) => "step_floor_reached",
        }
    }

    pub fn blowup(&self) -> Option<&BlowupReport> {
        match self {
            Verdict::Completed => None,
            Verdict::BlowupDetected(r) | Verdict::StepFloorReached(r) => Some(r),
        }
    }
}

/// Everything recorded by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub mass: f64,
    pub rows: Vec<Diagnostics>,
    pub snapshots: Vec<Snapshot>,
    pub verdict: Verdict,
    /// Steps whose result needed monotonicity clipping.
    pub clipped_steps: usize,
    pub rejected_steps: usize,
    pub final_profile: MassProfile,
}

impl SimulationTrace {
    pub fn final_time(&self) -> f64 {
        self.rows.last().map(|r| r.t).unwrap_or(0.0)
    }
}

/// Peak of the density over interior nodes: `(value, node)`.
pub fn interior_peak(profile: &MassProfile) -> (f64, usize) {
    let u = density_from_mass(profile);
    let n = profile.grid().intervals();
    u.values()[1..n]
        .iter()
        .enumerate()
        .fold((f64::NEG_INFINITY, 1), |(best, bi), (k, &v)| {
            if v > best {
                (v, k + 1)
            } else {
                (best, bi)
            }
        })
}

/// Threshold test on the interior density peak.
pub fn detect_blowup(profile: &MassProfile, t: f64, config: &SchemeConfig) -> Option<BlowupReport> {
    let (peak, node) = interior_peak(profile);
    if peak > config.threshold_for(profile.total_mass()) {
        Some(BlowupReport {
            reason: BlowupReason::Threshold,
            time: t,
            estimated_time: t,
            peak_value: peak,
            peak_node: node,
            peak_xi: profile.grid().nodes()[node],
        })
    } else {
        None
    }
}

fn extrapolate(report: &mut BlowupReport, prev: Option<&Diagnostics>, last: &Diagnostics) {
    if let Some(p) = prev {
        let (a, b) = (1.0 / p.sup_u, 1.0 / last.sup_u);
        if a > b && last.t > p.t {
            report.estimated_time = last.t + b * (last.t - p.t) / (a - b);
        }
    }
}

/// Runs the adaptive driver from `initial` to `config.t_end` or a verdict.
pub fn simulate(
    config: &SchemeConfig,
    initial: &MassProfile,
) -> Result<SimulationTrace, SolverError> {
    simulate_with_observer(config, initial, |_, _| {})
}

/// [`simulate`] with a callback receiving every accepted state.
pub fn simulate_with_observer(
    config: &SchemeConfig,
    initial: &MassProfile,
    mut observe: impl FnMut(f64, &MassProfile),
) -> Result<SimulationTrace, SolverError> {
    config.validate()?;
    if initial.grid().nodes() != config.grid.nodes() {
        return Err(SolverError::GridMismatch);
    }
    let m = initial.total_mass();
    let mut profile = initial.clone();
    let mut t = 0.0;
    let mut rows = vec![Diagnostics::of(&profile, 0.0, 0.0)];
    let mut snapshots = vec![Snapshot {
        index: 0,
        t: 0.0,
        profile: profile.clone(),
    }];
    observe(0.0, &profile);
    let mut next_snap = config.snapshot_every;
    let mut dt_nominal = config.dt0;
    let mut clipped_steps = 0;
    let mut rejected_steps = 0;
    let time_eps = 1e-12 * config.t_end;

    let mut verdict = detect_blowup(&profile, 0.0, config).map(Verdict::BlowupDetected);

    while verdict.is_none() && t < config.t_end - time_eps {
        let limit = config.cfl * step_limit(&profile, config.advection);
        let horizon = (config.t_end - t).min(next_snap - t);
        let mut dt = dt_nominal.min(limit).min(config.dt_max);
        let mut scheduled = false;
        if dt >= horizon {
            dt = horizon;
            scheduled = true;
        }
        let prev_sup = rows.last().unwrap().sup_u;
        let accepted = loop {
            if dt < config.dt_min {
                break None;
            }
            match step_with(&profile, dt, config.advection) {
                Ok(out) => {
                    let diag = Diagnostics::of(&out.profile, t + dt, dt);
                    let spiking = prev_sup > 0.0 && diag.sup_u > config.spike_factor * prev_sup;
                    if !diag.energy.is_finite() || spiking {
                        rejected_steps += 1;
                        dt *= 0.5;
                        scheduled = false;
                        continue;
                    }
                    break Some((out, diag));
                }
                Err(_) => {
                    rejected_steps += 1;
                    dt *= 0.5;
                    scheduled = false;
                }
            }
        };
        let Some((out, mut diag)) = accepted else {
            let (peak, node) = interior_peak(&profile);
            verdict = Some(Verdict::StepFloorReached(BlowupReport {
                reason: BlowupReason::StepFloor,
                time: t,
                estimated_time: t,
                peak_value: peak,
                peak_node: node,
                peak_xi: profile.grid().nodes()[node],
            }));
            break;
        };
        if out.clipped {
            clipped_steps += 1;
        }
        t = if scheduled { t + horizon } else { t + dt };
        if (t - next_snap).abs() <= time_eps {
            t = next_snap;
        }
        if (t - config.t_end).abs() <= time_eps {
            t = config.t_end;
        }
        diag.t = t;
        profile = out.profile;
        observe(t, &profile);
        if !scheduled {
            dt_nominal = dt * config.growth;
        }
        if let Some(mut r) = detect_blowup(&profile, t, config) {
            extrapolate(&mut r, rows.last(), &diag);
            rows.push(diag);
            verdict = Some(Verdict::BlowupDetected(r));
            break;
        }
        rows.push(diag);
        if t >= next_snap - time_eps {
            snapshots.push(Snapshot {
                index: snapshots.len(),
                t,
                profile: profile.clone(),
            });
            next_snap += config.snapshot_every;
        }
    }

    let verdict = verdict.unwrap_or(Verdict::Completed);
    if !matches!(verdict, Verdict::Completed)
        && snapshots.last().map(|s| s.t) != Some(rows.last().unwrap().t)
    {
        snapshots.push(Snapshot {
            index: snapshots.len(),
            t: rows.last().unwrap().t,
            profile: profile.clone(),
        });
    }
    Ok(SimulationTrace {
        mass: m,
        rows,
        snapshots,
        verdict,
        clipped_steps,
        rejected_steps,
        final_profile: profile,
    })
}

/// Outcome of co-evolving two ordered profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `max_t max_i (lower_i − upper_i)⁺`.
    pub max_violation: f64,
    pub steps: usize,
    pub final_time: f64,
    /// Smallest nodewise gap `upper − lower` seen (negative means violation).
    pub min_gap: f64,
}

/// Advances `lower0` and `upper0` with identical steps up to `t_end` and
/// records the largest ordering violation.
pub fn verify_discrete_comparison(
    lower0: &MassProfile,
    upper0: &MassProfile,
    t_end: f64,
    config: &SchemeConfig,
) -> Result<ComparisonReport, SolverError> {
    config.validate()?;
    if lower0.grid().nodes() != upper0.grid().nodes() {
        return Err(SolverError::GridMismatch);
    }
    if lower0.total_mass() != upper0.total_mass() {
        return Err(SolverError::MassMismatch);
    }
    let gap = |l: &MassProfile, u: &MassProfile| {
        l.values()
            .iter()
            .zip(u.values())
            .enumerate()
            .map(|(i, (a, b))| (i, b - a))
            .fold(
                (0, f64::INFINITY),
                |acc, x| if x.1 < acc.1 { x } else { acc },
            )
    };
    let (node, g0) = gap(lower0, upper0);
    if g0 < 0.0 {
        return Err(SolverError::NotOrdered { node, gap: -g0 });
    }
    let mut lower = lower0.clone();
    let mut upper = upper0.clone();
    let mut t = 0.0;
    let mut dt_nominal = config.dt0;
    let mut steps = 0;
    let mut min_gap = g0;
    while t < t_end * (1.0 - 1e-12) {
        let limit = config.cfl
            * stable_dt_pair(&lower, &upper)
                .min(step_limit(&lower, config.advection))
                .min(step_limit(&upper, config.advection));
        let mut dt = dt_nominal.min(limit).min(config.dt_max).min(t_end - t);
        let stepped = loop {
            if dt < config.dt_min {
                break None;
            }
            match (
                step_with(&lower, dt, config.advection),
                step_with(&upper, dt, config.advection),
            ) {
                (Ok(l), Ok(u)) => break Some((l.profile, u.profile)),
                _ => dt *= 0.5,
            }
        };
        let Some((l, u)) = stepped else {
            break;
        };
        lower = l;
        upper = u;
        t += dt;
        steps += 1;
        dt_nominal = dt * config.growth;
        min_gap = min_gap.min(gap(&lower, &upper).1);
    }
    Ok(ComparisonReport {
        max_violation: (-min_gap).max(0.0),
        steps,
        final_time: t,
        min_gap,
    })
}

/// `sup_t (sup_ξ M/ξ + m)/(2π)`, the uniform bound on `|v_r|`.
pub fn bound_gradient_v(trace: &SimulationTrace) -> f64 {
    trace
        .rows
        .iter()
        .map(|r| (r.sup_m_over_xi + trace.mass) / (2.0 * PI))
        .fold(0.0, f64::max)
}

/// Largest excess `max_i (M_i − W̄_a(ξ_i))⁺` over snapshots taken at or after `from`.
pub fn barrier_excess(trace: &SimulationTrace, barrier: &SuperBarrier, from: f64) -> f64 {
    trace
        .snapshots
        .iter()
        .filter(|s| s.t >= from)
        .map(|s| {
            s.profile
                .grid()
                .nodes()
                .iter()
                .zip(s.profile.values())
                .map(|(&x, &v)| v - barrier.value(x))
                .fold(0.0f64, f64::max)
        })
        .fold(0.0, f64::max)
}
