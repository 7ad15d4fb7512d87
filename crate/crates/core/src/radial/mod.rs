//! Grids, the mass-distribution transform and field reconstruction.
//!
//! A radial density `u(r)` on the unit disk is carried as its cumulative mass
//! `M(ξ) = 2π∫₀^√ξ u r dr = π∫₀^ξ u(√s) ds`, so that `M_ξ = π u(√ξ)`. The
//! chemical potential is recovered from
//! `−2π v_r(√ξ) √ξ = M(ξ) − mξ` and normalised to zero disk average.

mod grid;
pub mod numerics;

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub use grid::{Grid, MIN_INTERVALS};
pub use numerics::Integral;

use crate::csv::write_table;
use crate::PI;
use numerics::{cumulative_trapezoid, derivative, trapezoid};

/// Relative tolerance used when validating profile invariants.
pub const PROFILE_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadialError {
    #[error("grid needs at least {MIN_INTERVALS} intervals, got {0}")]
    TooFewIntervals(usize),
    #[error("grading exponent must be finite and >= 1, got {0}")]
    InvalidGrading(f64),
    #[error("grid nodes must start at 0 and end at 1")]
    BadEndpoints,
    #[error("grid nodes not strictly increasing at index {0}")]
    NotIncreasing(usize),
    #[error("sample count {got} does not match grid size {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("negative density {value} at node {node}")]
    NegativeDensity { node: usize, value: f64 },
    #[error("non-finite value at node {0}")]
    NonFinite(usize),
    #[error("invalid mass profile at node {node}: {reason}")]
    InvalidProfile { node: usize, reason: &'static str },
    #[error("total mass must be finite and nonnegative, got {0}")]
    InvalidMass(f64),
    #[error("unknown preset kind `{0}`")]
    UnknownPreset(String),
    #[error("preset parameter must be positive and finite, got {0}")]
    InvalidPresetParameter(f64),
}

/// Cumulative mass `M(ξ)` on a grid with total mass `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct MassProfile {
    grid: Arc<Grid>,
    values: Vec<f64>,
    total_mass: f64,
}

impl MassProfile {
    /// Validates and builds a profile. Endpoint values within `10⁻⁹·m` of
    /// `0` and `m` are pinned exactly; monotonicity and range are checked
    /// up to [`PROFILE_TOL`]`·m`.
    pub fn new(
        grid: Arc<Grid>,
        mut values: Vec<f64>,
        total_mass: f64,
    ) -> Result<Self, RadialError> {
        if !(total_mass.is_finite() && total_mass >= 0.0) {
            return Err(RadialError::InvalidMass(total_mass));
        }
        if values.len() != grid.len() {
            return Err(RadialError::LengthMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RadialError::NonFinite(i));
        }
        let n = values.len() - 1;
        let pin = 1e-9 * total_mass.max(f64::MIN_POSITIVE);
        if values[0].abs() > pin {
            return Err(RadialError::InvalidProfile {
                node: 0,
                reason: "M(0) must equal 0",
            });
        }
        if (values[n] - total_mass).abs() > pin {
            return Err(RadialError::InvalidProfile {
                node: n,
                reason: "M(1) must equal the total mass",
            });
        }
        values[0] = 0.0;
        values[n] = total_mass;
        let tol = PROFILE_TOL * total_mass;
        for i in 0..=n {
            if values[i] < -tol || values[i] > total_mass + tol {
                return Err(RadialError::InvalidProfile {
                    node: i,
                    reason: "value outside [0, m]",
                });
            }
            if i > 0 && values[i] < values[i - 1] - tol {
                return Err(RadialError::InvalidProfile {
                    node: i,
                    reason: "profile decreases",
                });
            }
        }
        Ok(MassProfile {
            grid,
            values,
            total_mass,
        })
    }

    /// Samples `f` at the nodes and validates.
    pub fn from_fn(
        grid: Arc<Grid>,
        total_mass: f64,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self, RadialError> {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self::new(grid, values, total_mass)
    }

    /// The constant-density state `M = mξ`.
    pub fn linear(grid: Arc<Grid>, total_mass: f64) -> Self {
        let values = grid.nodes().iter().map(|&x| total_mass * x).collect();
        MassProfile {
            grid,
            values,
            total_mass,
        }
    }

    /// Trusted constructor for values produced by the solvers, which
    /// maintain the invariants themselves.
    pub(crate) fn from_raw(grid: Arc<Grid>, values: Vec<f64>, total_mass: f64) -> Self {
        debug_assert_eq!(grid.len(), values.len());
        MassProfile {
            grid,
            values,
            total_mass,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// `M_i − mξ_i` at every node.
    pub fn excess(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(self.grid.nodes())
            .map(|(&v, &x)| v - self.total_mass * x)
            .collect()
    }

    /// `max_i M_i/ξ_i` over nodes with `ξ > 0`.
    pub fn sup_over_xi(&self) -> f64 {
        self.values
            .iter()
            .zip(self.grid.nodes())
            .skip(1)
            .map(|(v, x)| v / x)
            .fold(0.0, f64::max)
    }

    /// Nodewise sup-distance to another profile on the same grid.
    pub fn max_abs_diff(&self, other: &MassProfile) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `‖M − mξ‖∞`.
    pub fn distance_to_linear(&self) -> f64 {
        self.excess().iter().fold(0.0, |acc, e| acc.max(e.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Density,
    Potential,
}

/// Samples of a radial function at the radii `r_i = √ξ_i` of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    grid: Arc<Grid>,
    values: Vec<f64>,
    kind: FieldKind,
}

impl RadialField {
    /// A density field; samples must be finite and nonnegative.
    pub fn density(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, RadialError> {
        check_len(&grid, &values)?;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(RadialError::NonFinite(i));
            }
            if v < 0.0 {
                return Err(RadialError::NegativeDensity { node: i, value: v });
            }
        }
        Ok(RadialField {
            grid,
            values,
            kind: FieldKind::Density,
        })
    }

    /// Density from a function of the radius.
    pub fn density_from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self, RadialError> {
        let values = grid.radii().into_iter().map(f).collect();
        Self::density(grid, values)
    }

    /// A potential field (no sign restriction).
    pub fn potential(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, RadialError> {
        check_len(&grid, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RadialError::NonFinite(i));
        }
        Ok(RadialField {
            grid,
            values,
            kind: FieldKind::Potential,
        })
    }

    pub fn potential_from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Result<Self, RadialError> {
        let values = grid.radii().into_iter().map(f).collect();
        Self::potential(grid, values)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn radii(&self) -> Vec<f64> {
        self.grid.radii()
    }

    /// `2π∫₀¹ f r dr = π∫₀¹ f dξ` by trapezoid in `ξ`.
    pub fn disk_integral(&self) -> Integral {
        let q = trapezoid(&self.grid, &self.values);
        Integral {
            value: PI * q.value,
            error: PI * q.error,
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

fn check_len(grid: &Grid, values: &[f64]) -> Result<(), RadialError> {
    if values.len() != grid.len() {
        return Err(RadialError::LengthMismatch {
            expected: grid.len(),
            got: values.len(),
        });
    }
    Ok(())
}

/// Radial slope `v_r` of the potential at the grid radii.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSlope {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl PotentialSlope {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self, RadialError> {
        check_len(&grid, &values)?;
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(RadialError::NonFinite(i));
        }
        Ok(PotentialSlope { grid, values })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn radii(&self) -> Vec<f64> {
        self.grid.radii()
    }
}

/// `M(ξ_i) = π∫₀^{ξ_i} u dξ` by cumulative trapezoid; the total mass is the
/// full integral.
pub fn mass_from_density(u: &RadialField) -> Result<MassProfile, RadialError> {
    if let Some((i, &v)) = u.values.iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(RadialError::NegativeDensity { node: i, value: v });
    }
    let mut values = cumulative_trapezoid(&u.grid, &u.values);
    values.iter_mut().for_each(|v| *v *= PI);
    let m = *values.last().unwrap();
    Ok(MassProfile::from_raw(u.grid.clone(), values, m))
}

/// `u(√ξ_i) = M_ξ(ξ_i)/π`. Negative stencil noise is clamped to zero.
pub fn density_from_mass(profile: &MassProfile) -> RadialField {
    let d = derivative(&profile.grid, &profile.values);
    let values = d.into_iter().map(|x| (x / PI).max(0.0)).collect();
    RadialField {
        grid: profile.grid.clone(),
        values,
        kind: FieldKind::Density,
    }
}

/// `v_r(√ξ) = −(M(ξ) − mξ)/(2π√ξ)`, with the limit value `0` at the origin.
pub fn potential_slope_from_mass(profile: &MassProfile) -> PotentialSlope {
    let m = profile.total_mass;
    let values = profile
        .grid
        .nodes()
        .iter()
        .zip(&profile.values)
        .map(|(&x, &v)| {
            if x == 0.0 {
                0.0
            } else {
                -(v - m * x) / (2.0 * PI * x.sqrt())
            }
        })
        .collect();
    PotentialSlope {
        grid: profile.grid.clone(),
        values,
    }
}

/// Integrates the slope in `r` (trapezoid) and removes the disk average.
pub fn potential_from_slope(slope: &PotentialSlope) -> RadialField {
    let r = slope.grid.radii();
    let mut v = Vec::with_capacity(r.len());
    let mut acc = 0.0;
    v.push(0.0);
    for i in 0..r.len() - 1 {
        acc += 0.5 * (r[i + 1] - r[i]) * (slope.values[i] + slope.values[i + 1]);
        v.push(acc);
    }
    let mean = trapezoid(&slope.grid, &v).value;
    v.iter_mut().for_each(|x| *x -= mean);
    RadialField {
        grid: slope.grid.clone(),
        values: v,
        kind: FieldKind::Potential,
    }
}

/// Potential with zero disk average reconstructed from a mass profile.
pub fn potential_from_mass(profile: &MassProfile) -> RadialField {
    potential_from_slope(&potential_slope_from_mass(profile))
}

/// `∫_Ω u|x|² dx = m − ∫₀¹ M dξ`.
pub fn second_moment(profile: &MassProfile) -> Integral {
    let q = trapezoid(&profile.grid, &profile.values);
    Integral {
        value: profile.total_mass - q.value,
        error: q.error,
    }
}

/// Initial-data families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// `u ≡ m/π`.
    Constant,
    /// The scaled plane steady state `8λ²/(λ² + r²)²`, rescaled to mass `m`.
    Pks { lambda: f64 },
    /// The supersolution profile `m(a+1)ξ/(a+ξ)`; small `a` concentrates mass
    /// near the origin.
    Barrier { a: f64 },
}

impl Preset {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::Pks { .. } => "pks",
            Preset::Barrier { .. } => "barrier",
        }
    }

    /// Builds a preset from its kind name and optional parameter.
    pub fn from_kind(kind: &str, param: Option<f64>) -> Result<Self, RadialError> {
        let kind: PresetKind = kind.parse()?;
        let p = |default: f64| param.unwrap_or(default);
        let preset = match kind {
            PresetKind::Constant => Preset::Constant,
            PresetKind::Pks => Preset::Pks { lambda: p(1.0) },
            PresetKind::Barrier => Preset::Barrier { a: p(1.0) },
        };
        preset.validate()?;
        Ok(preset)
    }

    pub fn validate(&self) -> Result<(), RadialError> {
        match *self {
            Preset::Constant => Ok(()),
            Preset::Pks { lambda: p } | Preset::Barrier { a: p } => {
                if p.is_finite() && p > 0.0 {
                    Ok(())
                } else {
                    Err(RadialError::InvalidPresetParameter(p))
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Constant,
    Pks,
    Barrier,
}

impl FromStr for PresetKind {
    type Err = RadialError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constant" => Ok(PresetKind::Constant),
            "pks" => Ok(PresetKind::Pks),
            "barrier" => Ok(PresetKind::Barrier),
            other => Err(RadialError::UnknownPreset(other.to_string())),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Preset::Constant => write!(f, "constant"),
            Preset::Pks { lambda } => write!(f, "pks(lambda={lambda})"),
            Preset::Barrier { a } => write!(f, "barrier(a={a})"),
        }
    }
}

/// Samples a preset with total mass exactly `m`.
///
/// On the unit disk `8λ²/(λ²+r²)²` carries mass `8π/(1+λ²)`, so the PKS
/// profile is rescaled multiplicatively: `M = m(1+λ²)ξ/(λ²+ξ)`.
pub fn preset_profile(preset: Preset, m: f64, grid: Arc<Grid>) -> Result<MassProfile, RadialError> {
    preset.validate()?;
    if !(m.is_finite() && m >= 0.0) {
        return Err(RadialError::InvalidMass(m));
    }
    match preset {
        Preset::Constant => Ok(MassProfile::linear(grid, m)),
        Preset::Pks { lambda } => {
            let a = lambda * lambda;
            MassProfile::from_fn(grid, m, |x| m * (a + 1.0) * x / (a + x))
        }
        Preset::Barrier { a } => MassProfile::from_fn(grid, m, |x| m * (a + 1.0) * x / (a + x)),
    }
}

/// Writes the snapshot table `xi,M,u,v_r,v`.
pub fn write_profile_csv<W: Write>(profile: &MassProfile, w: W) -> io::Result<()> {
    let u = density_from_mass(profile);
    let s = potential_slope_from_mass(profile);
    let v = potential_from_slope(&s);
    let rows: Vec<Vec<f64>> = (0..profile.grid.len())
        .map(|i| {
            vec![
                profile.grid.nodes()[i],
                profile.values[i],
                u.values[i],
                s.values[i],
                v.values[i],
            ]
        })
        .collect();
    write_table(w, &["xi", "M", "u", "v_r", "v"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::CRITICAL_MASS;

    fn pks_density(lambda: f64) -> impl Fn(f64) -> f64 {
        move |r: f64| 8.0 * lambda * lambda / (lambda * lambda + r * r).powi(2)
    }

    /// Composite Simpson in `r` on a fine uniform mesh, independent of the grid.
    fn simpson_mass(u: impl Fn(f64) -> f64, rmax: f64) -> f64 {
        let n = 20_000;
        let h = rmax / n as f64;
        let f = |r: f64| 2.0 * PI * u(r) * r;
        let mut s = f(0.0) + f(rmax);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn constant_density_integrates_linearly() {
        let g = Grid::graded(64, 2.0).unwrap();
        let m = CRITICAL_MASS;
        let u = RadialField::density(g.clone(), vec![m / PI; g.len()]).unwrap();
        let prof = mass_from_density(&u).unwrap();
        for (x, v) in g.nodes().iter().zip(prof.values()) {
            assert!((v - m * x).abs() < 1e-13 * m);
        }
        assert!((prof.total_mass() - m).abs() < 1e-13);
    }

    #[test]
    fn pks_density_mass_matches_closed_form() {
        // closed form 8πξ/(1+ξ); Simpson oracle for the total 4π
        let oracle_total = simpson_mass(pks_density(1.0), 1.0);
        assert!((oracle_total - 4.0 * PI).abs() < 1e-10);
        let g = Grid::uniform(2048).unwrap();
        let u = RadialField::density_from_fn(g.clone(), pks_density(1.0)).unwrap();
        let prof = mass_from_density(&u).unwrap();
        for (x, v) in g.nodes().iter().zip(prof.values()) {
            let exact = 8.0 * PI * x / (1.0 + x);
            assert!((v - exact).abs() < 1e-5, "xi={x}");
        }
        assert!((prof.total_mass() - oracle_total).abs() < 1e-5);
        let sub = simpson_mass(pks_density(1.0), 0.5_f64.sqrt());
        let i = g.nodes().iter().position(|&x| x == 0.5).unwrap();
        assert!((prof.values()[i] - sub).abs() < 1e-5);
    }

    #[test]
    fn zero_density_gives_zero_mass() {
        let g = Grid::uniform(32).unwrap();
        let u = RadialField::density(g.clone(), vec![0.0; g.len()]).unwrap();
        let prof = mass_from_density(&u).unwrap();
        assert!(prof.values().iter().all(|&v| v == 0.0));
        assert_eq!(prof.total_mass(), 0.0);
    }

    #[test]
    fn negative_density_rejected() {
        let g = Grid::uniform(32).unwrap();
        let mut vals = vec![1.0; g.len()];
        vals[5] = -1e-3;
        assert!(matches!(
            RadialField::density(g, vals),
            Err(RadialError::NegativeDensity { node: 5, .. })
        ));
    }

    #[test]
    fn density_of_linear_profile_is_constant() {
        let g = Grid::graded(100, 2.5).unwrap();
        let m = 3.7;
        let u = density_from_mass(&MassProfile::linear(g, m));
        assert!(u.values().iter().all(|v| (v - m / PI).abs() < 1e-10));
    }

    #[test]
    fn density_of_pks_mass_profile() {
        let g = Grid::uniform(1024).unwrap();
        let prof = MassProfile::from_fn(g.clone(), 4.0 * PI, |x| 8.0 * PI * x / (1.0 + x)).unwrap();
        let u = density_from_mass(&prof);
        for (x, v) in g.nodes().iter().zip(u.values()) {
            let exact = 8.0 / (1.0 + x).powi(2);
            // finite-difference cross-check of the analytic derivative
            let h = 1e-6;
            let fd = if *x > h && *x < 1.0 - h {
                let mm = |s: f64| 8.0 * PI * s / (1.0 + s);
                (mm(x + h) - mm(x - h)) / (2.0 * h) / PI
            } else {
                exact
            };
            assert!((fd - exact).abs() < 1e-6);
            assert!((v - exact).abs() < 1e-4, "xi={x}: {v} vs {exact}");
        }
    }

    #[test]
    fn density_of_barrier_at_half() {
        let g = Grid::uniform(4096).unwrap();
        let m = CRITICAL_MASS;
        let prof = MassProfile::from_fn(g.clone(), m, |x| m * 2.0 * x / (1.0 + x)).unwrap();
        let u = density_from_mass(&prof);
        let i = 2048;
        assert_eq!(g.nodes()[i], 0.5);
        assert!(
            (u.values()[i] - 16.0 / 2.25).abs() < 1e-6,
            "{}",
            u.values()[i]
        );
    }

    #[test]
    fn slope_examples() {
        let g = Grid::uniform(64).unwrap();
        let m = CRITICAL_MASS;
        let s = potential_slope_from_mass(&MassProfile::linear(g.clone(), m));
        assert!(s.values().iter().all(|v| v.abs() < 1e-14));

        let prof = MassProfile::from_fn(g.clone(), m, |x| m * 2.0 * x / (1.0 + x)).unwrap();
        let s = potential_slope_from_mass(&prof);
        let i = 16;
        assert_eq!(g.nodes()[i], 0.25);
        assert!((s.values()[i] + 1.2).abs() < 1e-12);
        assert_eq!(s.values()[0], 0.0);
        assert!(s.values()[64].abs() < 1e-14);
    }

    #[test]
    fn potential_examples() {
        let g = Grid::graded(256, 2.0).unwrap();
        let zero = PotentialSlope::new(g.clone(), vec![0.0; g.len()]).unwrap();
        let v = potential_from_slope(&zero);
        assert!(v.values().iter().all(|&x| x == 0.0));

        let lin = PotentialSlope::new(g.clone(), g.radii()).unwrap();
        let v = potential_from_slope(&lin);
        for (r, val) in g.radii().iter().zip(v.values()) {
            assert!((val - (r * r / 2.0 - 0.25)).abs() < 1e-12);
        }
        assert!(v.disk_integral().value.abs() < 1e-13);
    }

    #[test]
    fn second_moment_examples() {
        let g = Grid::uniform(1024).unwrap();
        let m = CRITICAL_MASS;
        let q = second_moment(&MassProfile::linear(g.clone(), m));
        assert!((q.value - m / 2.0).abs() < 1e-12);

        let prof = MassProfile::from_fn(g.clone(), 4.0 * PI, |x| 8.0 * PI * x / (1.0 + x)).unwrap();
        let q = second_moment(&prof);
        // analytic: 4π − ∫8πξ/(1+ξ) dξ = 4π − 8π(1 − ln 2); the total here is 4π
        let exact = 4.0 * PI - 8.0 * PI * (1.0 - 2f64.ln());
        assert!((q.value - exact).abs() < 10.0 * q.error + 1e-12);

        let mut vals = vec![m; g.len()];
        vals[0] = 0.0;
        let dirac = MassProfile::new(g.clone(), vals, m).unwrap();
        let h = g.spacing(0);
        assert!(second_moment(&dirac).value <= 0.5 * h * m + 1e-12);
    }

    #[test]
    fn presets() {
        let g = Grid::uniform(100).unwrap();
        let m = CRITICAL_MASS;
        let c = preset_profile(Preset::Constant, m, g.clone()).unwrap();
        assert_eq!(c, MassProfile::linear(g.clone(), m));

        let p = preset_profile(Preset::Pks { lambda: 1.0 }, m, g.clone()).unwrap();
        for (x, v) in g.nodes().iter().zip(p.values()) {
            assert!((v - 16.0 * PI * x / (1.0 + x)).abs() < 1e-12);
        }

        let b = preset_profile(Preset::Barrier { a: 0.01 }, 10.0 * PI, g.clone()).unwrap();
        assert_eq!(g.nodes()[1], 0.01);
        assert!((b.values()[1] - 5.05 * PI).abs() < 1e-12);
        assert_eq!(b.values()[100], 10.0 * PI);

        assert!(matches!(
            Preset::from_kind("dirac", None),
            Err(RadialError::UnknownPreset(_))
        ));
        assert!(Preset::from_kind("pks", Some(0.0)).is_err());
        assert!(Preset::from_kind("barrier", Some(-1.0)).is_err());
        assert_eq!(
            Preset::from_kind("pks", Some(0.05)).unwrap(),
            Preset::Pks { lambda: 0.05 }
        );
    }

    #[test]
    fn profile_validation() {
        let g = Grid::uniform(16).unwrap();
        let mut v: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x).collect();
        v[4] = v[3] - 0.1;
        assert!(matches!(
            MassProfile::new(g.clone(), v, 2.0),
            Err(RadialError::InvalidProfile { node: 4, .. })
        ));
        let v: Vec<f64> = g.nodes().iter().map(|x| 2.0 * x).collect();
        assert!(MassProfile::new(g.clone(), v.clone(), 3.0).is_err());
        assert!(MassProfile::new(g.clone(), v[1..].to_vec(), 2.0).is_err());
    }

    #[test]
    fn snapshot_csv_header() {
        let g = Grid::uniform(16).unwrap();
        let mut buf = Vec::new();
        write_profile_csv(&MassProfile::linear(g, 1.0), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("xi,M,u,v_r,v\n"));
        assert_eq!(text.lines().count(), 18);
    }
}
