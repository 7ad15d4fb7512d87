//! Stationary problem `QW = 0`, `W(0) = 0`, `W(1) = m`, the uniqueness sweep
//! and long-time convergence.
//!
//! Everything here works with the excess `w = W − mξ`, which vanishes at both
//! ends and keeps the residual free of cancellation:
//! `QW = −4ξ w″ − (w/π)(m + w′)`.

use std::sync::Arc;

use thiserror::Error;

use crate::barriers::{
    default_derivative_bound, find_dominated_sub, find_dominating_super, log_space, BarrierError,
    Family, Profile, SubBarrier, SuperBarrier,
};
use crate::radial::numerics::{d1_weights, d2_weights};
use crate::radial::{density_from_mass, potential_from_mass, Grid, MassProfile};
use crate::solver::{solve_tridiagonal, SimulationTrace, SolverError};
use crate::PI;

/// Newton stops once the residual max-norm drops below `NEWTON_TOL·m`.
pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 100;
/// Initial pseudo-time step of the continuation; it grows like
/// `‖R₀‖/‖R_k‖` so that late iterations are plain Newton steps.
pub const PSEUDO_TIME: f64 = 0.1;
/// Pseudo-time reductions tried before an iteration is abandoned.
const MAX_TAU_CUTS: usize = 8;
/// Largest parameter sampled by the uniqueness sweep.
pub const SWEEP_PARAM_MAX: f64 = 1e3;
pub const SWEEP_SAMPLES: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyError {
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("initial profile has total mass {found}, expected {expected}")]
    MassMismatch { expected: f64, found: f64 },
    #[error("Newton linear solve failed at iteration {0}")]
    SingularJacobian(usize),
    #[error(transparent)]
    Barrier(#[from] BarrierError),
}

fn residual_of_excess(x: &[f64], w: &[f64], m: f64) -> Vec<f64> {
    let n = x.len() - 1;
    let mut r = vec![0.0; n + 1];
    for i in 1..n {
        let (a0, a1, a2) = d2_weights(x, i);
        let (b0, b1, b2) = d1_weights(x, i);
        let w2 = a0 * w[i - 1] + a1 * w[i] + a2 * w[i + 1];
        let w1 = b0 * w[i - 1] + b1 * w[i] + b2 * w[i + 1];
        r[i] = -4.0 * x[i] * w2 - w[i] / PI * (m + w1);
    }
    r
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn nondecreasing(x: &[f64], w: &[f64], m: f64) -> bool {
    (1..x.len()).all(|i| m * (x[i] - x[i - 1]) + (w[i] - w[i - 1]) >= 0.0)
}

/// Nodewise `QW` with centered three-point stencils; zero at the endpoints.
pub fn stationary_residual(w: &MassProfile) -> Vec<f64> {
    residual_of_excess(w.grid().nodes(), &w.excess(), w.total_mass())
}

/// One row of `newton_<m>.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonStep {
    pub iteration: usize,
    pub residual_norm: f64,
    /// `‖W − mξ‖∞`.
    pub distance: f64,
    /// Damping factor used to reach this iterate (1 for the initial row).
    pub damping: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub profile: MassProfile,
    pub converged: bool,
    pub iterations: usize,
    pub history: Vec<NewtonStep>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().map(|s| s.residual_norm).unwrap_or(0.0)
    }

    pub fn distance(&self) -> f64 {
        self.profile.distance_to_linear()
    }
}

/// Solves `(J + I/τ) δ = −r` over the interior nodes.
fn newton_direction(
    x: &[f64],
    w: &[f64],
    r: &[f64],
    m: f64,
    tau: f64,
) -> Result<Vec<f64>, SolverError> {
    let n = x.len() - 1;
    let k = n - 1;
    let (mut lower, mut diag, mut upper, mut rhs) =
        (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for i in 1..n {
        let (a0, a1, a2) = d2_weights(x, i);
        let (b0, b1, b2) = d1_weights(x, i);
        let w1 = b0 * w[i - 1] + b1 * w[i] + b2 * w[i + 1];
        let s = 4.0 * x[i];
        let j = i - 1;
        lower[j] = -s * a0 - w[i] / PI * b0;
        diag[j] = 1.0 / tau - s * a1 - (m + w1) / PI - w[i] / PI * b1;
        upper[j] = -s * a2 - w[i] / PI * b2;
        rhs[j] = -r[i];
    }
    solve_tridiagonal(&lower, &diag, &upper, &rhs)
}

/// Damped Newton iteration for `QW = 0` started from `init`.
///
/// Each linear system carries an extra `1/τ` on the diagonal (pseudo-transient
/// continuation: a linearised implicit Euler step of `W_t = −QW`), with `τ`
/// growing as the residual decreases. The full update is kept whenever it
/// leaves `W` nondecreasing, since the flow need not reduce the residual
/// monotonically; otherwise it is halved until the residual max-norm
/// decreases. If no fraction helps, the pseudo-time step is cut tenfold and
/// the iteration retried. Far from the solution this follows the flow instead of
/// stalling; near it the iteration is Newton's method.
///
/// Non-convergence is not an error: the report carries `converged = false`
/// together with the last residual.
pub fn solve_stationary_newton(m: f64, init: &MassProfile) -> Result<NewtonReport, SteadyError> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(SteadyError::InvalidMass(m));
    }
    if (init.total_mass() - m).abs() > 1e-12 * m {
        return Err(SteadyError::MassMismatch {
            expected: m,
            found: init.total_mass(),
        });
    }
    let grid: Arc<Grid> = init.grid().clone();
    let x = grid.nodes();
    let n = grid.intervals();
    let lo: Vec<f64> = x.iter().map(|&s| -m * s).collect();
    let hi: Vec<f64> = x.iter().map(|&s| m * (1.0 - s)).collect();
    let clip = |w: &mut [f64]| {
        for i in 0..w.len() {
            w[i] = w[i].clamp(lo[i], hi[i]);
        }
        w[0] = 0.0;
        w[n] = 0.0;
    };

    let mut w = init.excess();
    clip(&mut w);
    let mut r = residual_of_excess(x, &w, m);
    let mut rnorm = max_norm(&r);
    let mut history = vec![NewtonStep {
        iteration: 0,
        residual_norm: rnorm,
        distance: max_norm(&w),
        damping: 1.0,
    }];
    let tol = NEWTON_TOL * m;
    let mut iterations = 0;
    let mut converged = rnorm < tol;

    let r0 = rnorm;
    // shrinks the pseudo-time step after a rejected iteration
    let mut tau_scale = 1.0;
    while !converged && iterations < NEWTON_MAX_ITER {
        iterations += 1;
        let mut accepted = None;
        for _ in 0..MAX_TAU_CUTS {
            // pseudo-time step, growing as the residual falls
            let tau = tau_scale * PSEUDO_TIME * r0 / rnorm;
            let delta = newton_direction(x, &w, &r, m, tau)
                .map_err(|_| SteadyError::SingularJacobian(iterations))?;
            let mut lambda = 1.0;
            for _ in 0..40 {
                let mut trial = w.clone();
                for i in 1..n {
                    trial[i] += lambda * delta[i - 1];
                }
                clip(&mut trial);
                let tr = residual_of_excess(x, &trial, m);
                let tn = max_norm(&tr);
                let full_flow_step = lambda == 1.0 && tn.is_finite() && nondecreasing(x, &trial, m);
                if tn < rnorm || full_flow_step {
                    accepted = Some((trial, tr, tn, lambda));
                    break;
                }
                lambda *= 0.5;
            }
            if accepted.is_some() {
                tau_scale = (tau_scale * 10.0).min(1.0);
                break;
            }
            tau_scale *= 0.1;
        }
        let Some((nw, nr, nn, lambda)) = accepted else {
            break;
        };
        w = nw;
        r = nr;
        rnorm = nn;
        history.push(NewtonStep {
            iteration: iterations,
            residual_norm: rnorm,
            distance: max_norm(&w),
            damping: lambda,
        });
        converged = rnorm < tol;
    }

    let values: Vec<f64> = x.iter().zip(&w).map(|(&s, &e)| m * s + e).collect();
    let mut values = values;
    values[0] = 0.0;
    values[n] = m;
    Ok(NewtonReport {
        profile: MassProfile::from_raw(grid.clone(), values, m),
        converged,
        iterations,
        history,
    })
}

/// One sampled barrier in the uniqueness sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub family: Family,
    pub param: f64,
    /// `min` over interior nodes of the signed gap divided by `ξ(1−ξ)`;
    /// the gap is `W̄_a − W` for the super family and `W − W̲_b` for the sub family.
    pub min_margin: f64,
    /// Node attaining the smallest gap.
    pub node: usize,
    pub ordered: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepConclusion {
    Sandwiched,
    Violated {
        family: Family,
        param: f64,
        node: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub mass: f64,
    pub derivative_bound: f64,
    pub samples: Vec<SweepSample>,
    pub conclusion: SweepConclusion,
    /// `max(‖W̄_A − mξ‖∞, ‖W̲_B − mξ‖∞)` at the largest sampled parameters.
    pub family_gap: f64,
    /// `‖W − mξ‖∞`.
    pub final_gap: f64,
}

impl SweepReport {
    pub fn is_sandwiched(&self) -> bool {
        matches!(self.conclusion, SweepConclusion::Sandwiched)
    }
}

fn signed_margin(upper: &[f64], lower: &[f64], x: &[f64]) -> (f64, usize, bool, f64) {
    let n = x.len() - 1;
    let mut best = (f64::INFINITY, 1);
    let mut worst_gap = f64::INFINITY;
    for i in 1..n {
        let gap = upper[i] - lower[i];
        worst_gap = worst_gap.min(gap);
        let scaled = gap / (x[i] * (1.0 - x[i]));
        if scaled < best.0 {
            best = (scaled, i);
        }
    }
    (best.0, best.1, worst_gap >= 0.0, worst_gap)
}

fn sweep_params(seed: f64) -> Vec<f64> {
    if seed >= SWEEP_PARAM_MAX {
        vec![seed]
    } else {
        log_space(seed, SWEEP_PARAM_MAX, SWEEP_SAMPLES)
    }
}

/// Samples `W̄_a` from the dominating seed up to `a = 10³`, and `W̲_b`
/// likewise, recording nodewise ordering against `w` and the scaled margin.
///
/// `w` is judged sandwiched only if every sample is ordered at every node.
pub fn uniqueness_sweep(w: &MassProfile) -> Result<SweepReport, SteadyError> {
    let m = w.total_mass();
    if !(m > 0.0) {
        return Err(SteadyError::InvalidMass(m));
    }
    let grid = w.grid().clone();
    let x = grid.nodes();
    let n = grid.intervals();
    let c = default_derivative_bound(w)?;
    let seed_super = find_dominating_super(w, c)?.a();
    let seed_sub = find_dominated_sub(w, c)?.b();
    let vals = w.excess();

    let mut samples = Vec::with_capacity(2 * SWEEP_SAMPLES);
    let mut conclusion = SweepConclusion::Sandwiched;
    let mut record = |s: SweepSample| {
        if !s.ordered && matches!(conclusion, SweepConclusion::Sandwiched) {
            conclusion = SweepConclusion::Violated {
                family: s.family,
                param: s.param,
                node: s.node,
            };
        }
        samples.push(s);
    };

    let mut family_gap: f64 = 0.0;
    let params = sweep_params(seed_super);
    let last = *params.last().unwrap();
    for a in params {
        let bar = SuperBarrier::new(a, m)?;
        let upper: Vec<f64> = x.iter().map(|&s| bar.excess(s, m)).collect();
        let (min_margin, node, ordered, _) = signed_margin(&upper, &vals, x);
        record(SweepSample {
            family: Family::Super,
            param: a,
            min_margin,
            node,
            ordered,
        });
        if a == last {
            family_gap = family_gap.max((1..n).map(|i| bar.excess(x[i], m)).fold(0.0, f64::max));
        }
    }
    let params = sweep_params(seed_sub);
    let last = *params.last().unwrap();
    for b in params {
        let bar = SubBarrier::new(b, m)?;
        let lower: Vec<f64> = x.iter().map(|&s| bar.excess(s, m)).collect();
        let (min_margin, node, ordered, _) = signed_margin(&vals, &lower, x);
        record(SweepSample {
            family: Family::Sub,
            param: b,
            min_margin,
            node,
            ordered,
        });
        if b == last {
            family_gap = family_gap.max((1..n).map(|i| -bar.excess(x[i], m)).fold(0.0, f64::max));
        }
    }

    Ok(SweepReport {
        mass: m,
        derivative_bound: c,
        samples,
        conclusion,
        family_gap,
        final_gap: w.distance_to_linear(),
    })
}

/// Distances to the constant steady state at snapshot times.
#[derive(Debug, Clone, PartialEq)]
pub struct LongtimeReport {
    pub times: Vec<f64>,
    /// `‖u(·,t_k) − m/π‖∞`.
    pub u_distance: Vec<f64>,
    /// `‖u(·,t_k) − m/π‖∞ / (m/π)`.
    pub u_distance_rel: Vec<f64>,
    /// `‖v(·,t_k)‖∞`.
    pub v_sup: Vec<f64>,
    /// Least-squares exponential rate fitted to the second half of the
    /// snapshots; `None` if fewer than two usable points.
    pub decay_rate: Option<f64>,
}

impl LongtimeReport {
    pub fn final_rel_distance(&self) -> f64 {
        self.u_distance_rel.last().copied().unwrap_or(f64::NAN)
    }
}

pub fn longtime_convergence(trace: &SimulationTrace) -> LongtimeReport {
    let m = trace.mass;
    let ubar = m / PI;
    let mut rep = LongtimeReport {
        times: Vec::new(),
        u_distance: Vec::new(),
        u_distance_rel: Vec::new(),
        v_sup: Vec::new(),
        decay_rate: None,
    };
    for s in &trace.snapshots {
        let u = density_from_mass(&s.profile);
        let v = potential_from_mass(&s.profile);
        let d = u
            .values()
            .iter()
            .fold(0.0f64, |a, &b| a.max((b - ubar).abs()));
        rep.times.push(s.t);
        rep.u_distance.push(d);
        rep.u_distance_rel
            .push(if ubar > 0.0 { d / ubar } else { d });
        rep.v_sup.push(v.sup_norm());
    }
    let t_final = rep.times.last().copied().unwrap_or(0.0);
    let pts: Vec<(f64, f64)> = rep
        .times
        .iter()
        .zip(&rep.u_distance)
        .filter(|(&t, &d)| t >= 0.5 * t_final && t > 0.0 && d > 1e-14 * ubar.max(1.0))
        .map(|(&t, &d)| (t, d.ln()))
        .collect();
    if pts.len() >= 2 {
        let k = pts.len() as f64;
        let mt = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
        if sxx > 0.0 {
            rep.decay_rate = Some(-sxy / sxx);
        }
    }
    rep
}
