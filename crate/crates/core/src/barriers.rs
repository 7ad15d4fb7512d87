//! The stationary operator `Q` and the closed-form barrier families.
//!
//! `QW = −4ξW″ − WW′/π + mξW′/π = −4ξW″ − (W − mξ)W′/π`. The concave family
//! `W̄_a(ξ) = m(a+1)ξ/(a+ξ)` has `QW̄_a > 0` on `(0,1)` for `m ≤ 8π`; the
//! convex family `W̲_b(ξ) = mbξ/(b+1−ξ)` has `QW̲_b < 0`. Both join `0` to
//! `m` and sweep from the step profile to the line `mξ`.
//!
//! Residuals are assembled from the excess `W − mξ`, which every barrier
//! provides in closed form, so the cancellation between the two transport
//! terms does not cost digits when `W` is close to `mξ`.

use std::sync::Arc;

use thiserror::Error;
use twofloat::TwoFloat;

use crate::radial::{Grid, MassProfile, RadialError};
use crate::PI;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BarrierError {
    #[error("family parameter must be positive and finite, got {0}")]
    InvalidParameter(f64),
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("operator is evaluated on the open interval (0,1), got xi = {0}")]
    OutsideOpenInterval(f64),
    #[error("derivative bound C = {bound} must exceed the total mass {mass}")]
    BoundTooSmall { bound: f64, mass: f64 },
    #[error("secant slope {slope} on cell {cell} violates 1/C < slope < C with C = {bound}")]
    DerivativeBound { cell: usize, slope: f64, bound: f64 },
    #[error("constructed barrier fails to order the profile at node {node}")]
    NotOrdered { node: usize },
    #[error("profiles are not ordered at node {node} (gap {gap})")]
    OrderingViolated { node: usize, gap: f64 },
    #[error("profiles live on different grids or have different endpoint values")]
    Incompatible,
    #[error(transparent)]
    Radial(#[from] RadialError),
}

/// A twice-differentiable profile on `[0,1]` with hand-coded derivatives.
pub trait Profile {
    fn value(&self, xi: f64) -> f64;
    fn slope(&self, xi: f64) -> f64;
    fn curvature(&self, xi: f64) -> f64;

    /// `W(ξ) − mξ`. Override with a closed form where one exists.
    fn excess(&self, xi: f64, m: f64) -> f64 {
        self.value(xi) - m * xi
    }

    /// The value in double-double arithmetic, for the finite-difference oracle.
    fn value_hp(&self, xi: TwoFloat) -> TwoFloat;

    /// Distance from `ξ` to the nearest point where the profile stops being
    /// smooth; the finite-difference step is a fixed fraction of it.
    fn smooth_radius(&self, xi: f64) -> f64 {
        xi
    }
}

/// Double-double quotient. The library division only returns a double-precision
/// quotient, so one correction step recovers the low word.
fn hp_div(n: TwoFloat, d: TwoFloat) -> TwoFloat {
    let q = n / d;
    q + (n - q * d) / d
}

fn check_parameter(p: f64) -> Result<(), BarrierError> {
    if p.is_finite() && p > 0.0 {
        Ok(())
    } else {
        Err(BarrierError::InvalidParameter(p))
    }
}

fn check_mass(m: f64) -> Result<(), BarrierError> {
    if m.is_finite() && m > 0.0 {
        Ok(())
    } else {
        Err(BarrierError::InvalidMass(m))
    }
}

/// `W̄_a(ξ) = m(a+1)ξ/(a+ξ)`: concave, `W̄_a(0) = 0`, `W̄_a(1) = m`.
///
/// Any positive mass is accepted so that the loss of the supersolution
/// property above `8π` can be examined; see [`residual_super_closed_form`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperBarrier {
    a: f64,
    m: f64,
}

impl SuperBarrier {
    pub fn new(a: f64, m: f64) -> Result<Self, BarrierError> {
        check_parameter(a)?;
        check_mass(m)?;
        Ok(SuperBarrier { a, m })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    /// `sup_ξ W̄_a(ξ)/ξ = m(a+1)/a`, attained at the origin.
    pub fn sup_over_xi(&self) -> f64 {
        self.m * (self.a + 1.0) / self.a
    }

    pub fn sample(&self, grid: Arc<Grid>) -> MassProfile {
        sample_profile(self, self.m, grid)
    }
}

impl Profile for SuperBarrier {
    fn value(&self, xi: f64) -> f64 {
        self.m * (self.a + 1.0) * xi / (self.a + xi)
    }

    fn slope(&self, xi: f64) -> f64 {
        let d = self.a + xi;
        self.m * (self.a + 1.0) * self.a / (d * d)
    }

    fn curvature(&self, xi: f64) -> f64 {
        let d = self.a + xi;
        -2.0 * self.m * (self.a + 1.0) * self.a / (d * d * d)
    }

    fn excess(&self, xi: f64, m: f64) -> f64 {
        if m == self.m {
            self.m * xi * (1.0 - xi) / (self.a + xi)
        } else {
            self.value(xi) - m * xi
        }
    }

    fn value_hp(&self, xi: TwoFloat) -> TwoFloat {
        let a = TwoFloat::from(self.a);
        hp_div(TwoFloat::from(self.m) * (a + 1.0) * xi, a + xi)
    }
}

/// `W̲_b(ξ) = mbξ/(b+1−ξ)`: convex, `W̲_b(0) = 0`, `W̲_b(1) = m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubBarrier {
    b: f64,
    m: f64,
}

impl SubBarrier {
    pub fn new(b: f64, m: f64) -> Result<Self, BarrierError> {
        check_parameter(b)?;
        check_mass(m)?;
        Ok(SubBarrier { b, m })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mass(&self) -> f64 {
        self.m
    }

    pub fn sample(&self, grid: Arc<Grid>) -> MassProfile {
        sample_profile(self, self.m, grid)
    }
}

impl Profile for SubBarrier {
    fn value(&self, xi: f64) -> f64 {
        self.m * self.b * xi / (self.b + 1.0 - xi)
    }

    fn slope(&self, xi: f64) -> f64 {
        let d = self.b + 1.0 - xi;
        self.m * (self.b + 1.0) * self.b / (d * d)
    }

    fn curvature(&self, xi: f64) -> f64 {
        let d = self.b + 1.0 - xi;
        2.0 * self.m * (self.b + 1.0) * self.b / (d * d * d)
    }

    fn excess(&self, xi: f64, m: f64) -> f64 {
        if m == self.m {
            -self.m * xi * (1.0 - xi) / (self.b + 1.0 - xi)
        } else {
            self.value(xi) - m * xi
        }
    }

    fn value_hp(&self, xi: TwoFloat) -> TwoFloat {
        let b = TwoFloat::from(self.b);
        hp_div(TwoFloat::from(self.m) * b * xi, b + 1.0 - xi)
    }

    /// The pole at `ξ = b + 1` is close to the interval when `b` is small.
    fn smooth_radius(&self, xi: f64) -> f64 {
        xi.min(self.b + 1.0 - xi)
    }
}

/// The stationary solution `mξ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearProfile {
    pub m: f64,
}

impl Profile for LinearProfile {
    fn value(&self, xi: f64) -> f64 {
        self.m * xi
    }

    fn slope(&self, _xi: f64) -> f64 {
        self.m
    }

    fn curvature(&self, _xi: f64) -> f64 {
        0.0
    }

    fn excess(&self, xi: f64, m: f64) -> f64 {
        (self.m - m) * xi
    }

    fn value_hp(&self, xi: TwoFloat) -> TwoFloat {
        TwoFloat::from(self.m) * xi
    }
}

fn sample_profile(p: &impl Profile, m: f64, grid: Arc<Grid>) -> MassProfile {
    let n = grid.intervals();
    let values = grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, &x)| match i {
            0 => 0.0,
            _ if i == n => m,
            _ => p.value(x),
        })
        .collect();
    MassProfile::from_raw(grid, values, m)
}

/// `Q` evaluated at one point of the open interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorResidual {
    pub xi: f64,
    pub value: f64,
}

fn check_open(xi: f64) -> Result<(), BarrierError> {
    if xi > 0.0 && xi < 1.0 {
        Ok(())
    } else {
        Err(BarrierError::OutsideOpenInterval(xi))
    }
}

/// `QW(ξ) = −4ξW″ − (W − mξ)W′/π` from the profile's analytic derivatives.
pub fn apply_q(w: &impl Profile, m: f64, xi: f64) -> Result<OperatorResidual, BarrierError> {
    check_open(xi)?;
    let value = -4.0 * xi * w.curvature(xi) - w.excess(xi, m) * w.slope(xi) / PI;
    Ok(OperatorResidual { xi, value })
}

/// Relative step of the finite-difference oracle.
pub const FD_RELATIVE_STEP: f64 = 1e-5;

/// `QW(ξ)` from central finite differences of the profile values alone,
/// with step `h = 10⁻⁵·ρ` where `ρ` is the profile's [`Profile::smooth_radius`]. The differences are taken in double-double
/// arithmetic so that the rounding error of the second difference stays far
/// below its truncation error.
pub fn apply_q_fd(w: &impl Profile, m: f64, xi: f64) -> Result<OperatorResidual, BarrierError> {
    check_open(xi)?;
    let x = TwoFloat::from(xi);
    let h = TwoFloat::from(FD_RELATIVE_STEP * w.smooth_radius(xi));
    let wm = w.value_hp(x - h);
    let w0 = w.value_hp(x);
    let wp = w.value_hp(x + h);
    let d1 = (wp - wm) / (h * 2.0);
    let d2 = (wp - w0 * 2.0 + wm) / (h * h);
    let mm = TwoFloat::from(m);
    let q = -(x * 4.0) * d2 - (w0 - mm * x) * d1 / twofloat::consts::PI;
    Ok(OperatorResidual {
        xi,
        value: f64::from(q),
    })
}

/// `QW̄_a = [mξ(a+1)a/(a+ξ)³]·(8π − m + mξ)/π`.
pub fn residual_super_closed_form(a: f64, m: f64, xi: f64) -> f64 {
    let d = a + xi;
    m * xi * (a + 1.0) * a / (d * d * d) * (8.0 * PI - m + m * xi) / PI
}

/// `QW̲_b = −[mξ(b+1)b/(π(b+1−ξ)³)]·(8π − m + mξ)`.
pub fn residual_sub_closed_form(b: f64, m: f64, xi: f64) -> f64 {
    let d = b + 1.0 - xi;
    -m * xi * (b + 1.0) * b / (PI * d * d * d) * (8.0 * PI - m + m * xi)
}

/// Secant slopes `(M_{i+1} − M_i)/(ξ_{i+1} − ξ_i)` of a profile.
pub fn secant_slopes(profile: &MassProfile) -> Vec<f64> {
    let x = profile.grid().nodes();
    profile
        .values()
        .windows(2)
        .zip(x.windows(2))
        .map(|(v, x)| (v[1] - v[0]) / (x[1] - x[0]))
        .collect()
}

/// Default derivative bound: `2.2·max(s, 1/s)` over the secant slopes `s = πu`.
pub fn default_derivative_bound(profile: &MassProfile) -> Result<f64, BarrierError> {
    let mut worst: f64 = 0.0;
    for (cell, s) in secant_slopes(profile).into_iter().enumerate() {
        if !(s > 0.0) {
            return Err(BarrierError::DerivativeBound {
                cell,
                slope: s,
                bound: f64::INFINITY,
            });
        }
        worst = worst.max(s).max(1.0 / s);
    }
    Ok(2.2 * worst)
}

fn check_bounds(profile: &MassProfile, c: f64) -> Result<f64, BarrierError> {
    let m = profile.total_mass();
    check_mass(m)?;
    if !(c > m) || !c.is_finite() {
        return Err(BarrierError::BoundTooSmall { bound: c, mass: m });
    }
    for (cell, s) in secant_slopes(profile).into_iter().enumerate() {
        if !(s > 1.0 / c && s < c) {
            return Err(BarrierError::DerivativeBound {
                cell,
                slope: s,
                bound: c,
            });
        }
    }
    Ok(m)
}

/// Relative margin by which a constructed barrier clears the envelope.
pub const ENVELOPE_MARGIN: f64 = 1e-6;

/// The weakest `W̄_a` clearing the upper envelope
/// `f̄ = min{Cξ, m − (1−ξ)/C}` at its kink `ξ₀ = (m − 1/C)/(C − 1/C)`.
///
/// Secant slopes in `(1/C, C)` put the profile below `f̄` at every node, and
/// concavity of `W̄_a` then carries `W̄_a(ξ₀) > f̄(ξ₀)` to all of `(0,1)`.
pub fn find_dominating_super(profile: &MassProfile, c: f64) -> Result<SuperBarrier, BarrierError> {
    let m = check_bounds(profile, c)?;
    let inv = 1.0 / c;
    let xi0 = (m - inv) / (c - inv);
    let fbar = (c * xi0).min(m - (1.0 - xi0) * inv);
    let margin = (ENVELOPE_MARGIN * m).min(0.5 * (m - fbar));
    let target = fbar + margin;
    let a = xi0 * (m - target) / (target - m * xi0);
    let barrier = SuperBarrier::new(a, m)?;
    for (i, (&x, &v)) in profile
        .grid()
        .nodes()
        .iter()
        .zip(profile.values())
        .enumerate()
    {
        if barrier.value(x) < v && i != 0 && i != profile.grid().intervals() {
            return Err(BarrierError::NotOrdered { node: i });
        }
    }
    Ok(barrier)
}

/// Mirror construction: the weakest `W̲_b` below the lower envelope
/// `max{ξ/C, m − C(1−ξ)}` at its kink `ξ₁ = (C − m)/(C − 1/C)`.
pub fn find_dominated_sub(profile: &MassProfile, c: f64) -> Result<SubBarrier, BarrierError> {
    let m = check_bounds(profile, c)?;
    let inv = 1.0 / c;
    let xi1 = (c - m) / (c - inv);
    let flow = (xi1 * inv).max(m - c * (1.0 - xi1));
    let margin = (ENVELOPE_MARGIN * m).min(0.5 * flow);
    let target = flow - margin;
    let b = target * (1.0 - xi1) / (m * xi1 - target);
    let barrier = SubBarrier::new(b, m)?;
    for (i, (&x, &v)) in profile
        .grid()
        .nodes()
        .iter()
        .zip(profile.values())
        .enumerate()
    {
        if barrier.value(x) > v && i != 0 && i != profile.grid().intervals() {
            return Err(BarrierError::NotOrdered { node: i });
        }
    }
    Ok(barrier)
}

/// `min` over interior nodes of `(upper − lower)/(ξ(1−ξ))`.
pub fn separation_margin(upper: &MassProfile, lower: &MassProfile) -> Result<f64, BarrierError> {
    let grid = upper.grid();
    if grid.nodes() != lower.grid().nodes() {
        return Err(BarrierError::Incompatible);
    }
    let n = grid.intervals();
    let (u, l) = (upper.values(), lower.values());
    let tol = 1e-12 * upper.total_mass().max(lower.total_mass());
    if (u[0] - l[0]).abs() > tol || (u[n] - l[n]).abs() > tol {
        return Err(BarrierError::Incompatible);
    }
    let mut margin = f64::INFINITY;
    for i in 1..n {
        let gap = u[i] - l[i];
        if gap < 0.0 {
            return Err(BarrierError::OrderingViolated { node: i, gap });
        }
        let x = grid.nodes()[i];
        margin = margin.min(gap / (x * (1.0 - x)));
    }
    Ok(margin)
}

/// Which family an audit row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Super,
    Sub,
}

/// One line of the residual audit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub param: f64,
    pub m: f64,
    pub xi: f64,
    pub closed: f64,
    pub analytic: f64,
    pub fd: f64,
}

impl AuditRow {
    pub fn abs_err(&self) -> f64 {
        (self.closed - self.fd).abs()
    }

    pub fn rel_err_fd(&self) -> f64 {
        (self.closed - self.fd).abs() / self.closed.abs()
    }

    pub fn rel_err_analytic(&self) -> f64 {
        (self.closed - self.analytic).abs() / self.closed.abs()
    }
}

/// Evaluates closed form, analytic-derivative and finite-difference
/// residuals over a product grid of parameters, masses and points.
pub fn audit(
    family: Family,
    params: &[f64],
    masses: &[f64],
    xis: &[f64],
) -> Result<Vec<AuditRow>, BarrierError> {
    let mut rows = Vec::with_capacity(params.len() * masses.len() * xis.len());
    for &p in params {
        for &m in masses {
            for &xi in xis {
                let row = match family {
                    Family::Super => {
                        let w = SuperBarrier::new(p, m)?;
                        AuditRow {
                            param: p,
                            m,
                            xi,
                            closed: residual_super_closed_form(p, m, xi),
                            analytic: apply_q(&w, m, xi)?.value,
                            fd: apply_q_fd(&w, m, xi)?.value,
                        }
                    }
                    Family::Sub => {
                        let w = SubBarrier::new(p, m)?;
                        AuditRow {
                            param: p,
                            m,
                            xi,
                            closed: residual_sub_closed_form(p, m, xi),
                            analytic: apply_q(&w, m, xi)?.value,
                            fd: apply_q_fd(&w, m, xi)?.value,
                        }
                    }
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// `n` log-spaced values on `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (l, h) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (l + (h - l) * k as f64 / (n - 1) as f64).exp())
        .collect()
}
