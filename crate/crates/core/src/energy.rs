//! Free energy, dissipation and the decay audit.
//!
//! `F(u) = ∫_Ω u ln u − ½∫_Ω uv` and `D = ∫_Ω u|∇(ln u − v)|²`. On the
//! grid in `ξ = r²` these read `F = π∫₀¹(u ln u − uv/2) dξ` and
//! `D = 4π∫₀¹ ξ u (∂_ξ ln u − ∂_ξ v)² dξ`.

use rand::Rng;
use thiserror::Error;

use crate::radial::numerics::{derivative, trapezoid};
use crate::radial::{
    density_from_mass, mass_from_density, potential_from_mass, Grid, Integral, MassProfile,
    RadialError, RadialField,
};
use crate::solver::SimulationTrace;
use crate::{CRITICAL_MASS, PI};
use std::sync::Arc;

/// Budget residuals are taken relative to at least this fraction of
/// `max|F|`, so a run whose energy does not change reports a rounding-level
/// residual instead of a ratio of rounding errors.
pub const BUDGET_FLOOR: f64 = 1e-3;

/// Densities below `U_FLOOR·m/π` are floored inside logarithms.
pub const U_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnergyError {
    #[error("mass {0} exceeds the critical mass 8π")]
    Supercritical(f64),
    #[error("mass must be positive, got {0}")]
    NonPositiveMass(f64),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error(transparent)]
    Radial(#[from] RadialError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub energy: f64,
    pub dissipation: f64,
    pub energy_error: f64,
    pub dissipation_error: f64,
    /// Nodes where `u` was raised to the floor inside the logarithm.
    pub clamp_count: usize,
}

fn floor_for(mass: f64) -> f64 {
    (U_FLOOR * mass / PI).max(f64::MIN_POSITIVE)
}

fn free_energy_parts(grid: &Grid, u: &[f64], v: &[f64], mass: f64) -> (Integral, usize) {
    let floor = floor_for(mass);
    let mut clamps = 0;
    let integrand: Vec<f64> = u
        .iter()
        .zip(v)
        .map(|(&ui, &vi)| {
            if ui < floor {
                clamps += 1;
            }
            ui * ui.max(floor).ln() - 0.5 * ui * vi
        })
        .collect();
    let q = trapezoid(grid, &integrand);
    (
        Integral {
            value: PI * q.value,
            error: PI * q.error,
        },
        clamps,
    )
}

fn dissipation_parts(grid: &Grid, u: &[f64], v_xi: &[f64], mass: f64) -> Integral {
    let floor = floor_for(mass);
    let ln_u: Vec<f64> = u.iter().map(|&x| x.max(floor).ln()).collect();
    let dln = derivative(grid, &ln_u);
    let integrand: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(u)
        .zip(dln.iter().zip(v_xi))
        .map(|((&x, &ui), (&dl, &dv))| {
            let g = dl - dv;
            x * ui * g * g
        })
        .collect();
    let q = trapezoid(grid, &integrand);
    Integral {
        value: 4.0 * PI * q.value,
        error: 4.0 * PI * q.error,
    }
}

fn same_grid(a: &RadialField, b: &RadialField) -> Result<(), EnergyError> {
    if Arc::ptr_eq(a.grid(), b.grid()) || a.grid().nodes() == b.grid().nodes() {
        Ok(())
    } else {
        Err(EnergyError::GridMismatch)
    }
}

/// `F(u) = 2π∫₀¹(u ln u − uv/2) r dr`, with `u` floored at `10⁻¹⁴·m/π`
/// inside the logarithm only.
pub fn free_energy(u: &RadialField, v: &RadialField) -> Result<f64, EnergyError> {
    same_grid(u, v)?;
    let mass = u.disk_integral().value;
    Ok(free_energy_parts(u.grid(), u.values(), v.values(), mass)
        .0
        .value)
}

/// `D(u, v) = 2π∫₀¹ u (∂_r ln u − ∂_r v)² r dr ≥ 0`.
pub fn dissipation(u: &RadialField, v: &RadialField) -> Result<f64, EnergyError> {
    same_grid(u, v)?;
    let mass = u.disk_integral().value;
    let v_xi = derivative(u.grid(), v.values());
    Ok(dissipation_parts(u.grid(), u.values(), &v_xi, mass).value)
}

/// Energy and dissipation of the state described by a mass profile.
///
/// The potential gradient uses `∂_ξ v = −(M − mξ)/(4πξ)` directly rather than
/// differentiating the reconstructed potential.
pub fn energy_report(profile: &MassProfile) -> EnergyReport {
    let grid = profile.grid();
    let m = profile.total_mass();
    let u = density_from_mass(profile);
    let v = potential_from_mass(profile);
    let (f, clamps) = free_energy_parts(grid, u.values(), v.values(), m);
    let v_xi: Vec<f64> = grid
        .nodes()
        .iter()
        .zip(profile.values())
        .zip(u.values())
        .map(|((&x, &mv), &uv)| {
            if x == 0.0 {
                -(PI * uv - m) / (4.0 * PI)
            } else {
                -(mv - m * x) / (4.0 * PI * x)
            }
        })
        .collect();
    let d = dissipation_parts(grid, u.values(), &v_xi, m);
    EnergyReport {
        energy: f.value,
        dissipation: d.value,
        energy_error: f.error,
        dissipation_error: d.error,
        clamp_count: clamps,
    }
}

/// Results of the energy decay audit over a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayAudit {
    /// Largest single-step increase of `F` (zero if `F` never increases).
    pub max_jump: f64,
    /// `max_jump / max|F|`.
    pub max_jump_rel: f64,
    /// `F(0) − F(T)`.
    pub energy_drop: f64,
    /// `∫₀ᵀ D dt` by the trapezoid rule on the trace times.
    pub dissipated: f64,
    /// `|(F(0) − F(T)) − ∫D dt| / max(|F(0) − F(T)|, 10⁻³·max|F|)`.
    pub budget_residual_rel: f64,
    pub rows: Vec<AuditRow>,
}

/// One row of `energy_audit.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditRow {
    pub t: f64,
    pub energy: f64,
    pub dissipation: f64,
    pub dfdt_est: f64,
    /// `(F(0) − F(t)) − ∫₀ᵗ D`.
    pub budget_residual: f64,
}

/// Audits a time series of energies and dissipations.
pub fn audit_series(t: &[f64], f: &[f64], d: &[f64]) -> DecayAudit {
    let n = t.len();
    assert!(n == f.len() && n == d.len());
    let mut rows = Vec::with_capacity(n);
    let mut max_jump: f64 = 0.0;
    let mut integral = 0.0;
    for k in 0..n {
        if k > 0 {
            max_jump = max_jump.max(f[k] - f[k - 1]);
            integral += 0.5 * (t[k] - t[k - 1]) * (d[k] + d[k - 1]);
        }
        let dfdt = if n < 2 {
            0.0
        } else if k == 0 {
            (f[1] - f[0]) / (t[1] - t[0])
        } else if k == n - 1 {
            (f[k] - f[k - 1]) / (t[k] - t[k - 1])
        } else {
            (f[k + 1] - f[k - 1]) / (t[k + 1] - t[k - 1])
        };
        rows.push(AuditRow {
            t: t[k],
            energy: f[k],
            dissipation: d[k],
            dfdt_est: dfdt,
            budget_residual: (f[0] - f[k]) - integral,
        });
    }
    let fmax = f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let drop = if n > 0 { f[0] - f[n - 1] } else { 0.0 };
    let residual = (drop - integral).abs();
    DecayAudit {
        max_jump,
        max_jump_rel: if fmax > 0.0 { max_jump / fmax } else { 0.0 },
        energy_drop: drop,
        dissipated: integral,
        budget_residual_rel: {
            let scale = drop.abs().max(BUDGET_FLOOR * fmax);
            if scale > 0.0 {
                residual / scale
            } else {
                residual
            }
        },
        rows,
    }
}

/// Decay audit of a simulation trace.
pub fn audit_decay(trace: &SimulationTrace) -> DecayAudit {
    let t: Vec<f64> = trace.rows.iter().map(|r| r.t).collect();
    let f: Vec<f64> = trace.rows.iter().map(|r| r.energy).collect();
    let d: Vec<f64> = trace.rows.iter().map(|r| r.dissipation).collect();
    audit_series(&t, &f, &d)
}

/// `F(U) − λ ln(λ/π)` for a radial density of mass `λ ∈ (0, 8π]`.
pub fn loghls_check(u: &RadialField) -> Result<f64, EnergyError> {
    let profile = mass_from_density(u)?;
    let lambda = profile.total_mass();
    if !(lambda > 0.0) {
        return Err(EnergyError::NonPositiveMass(lambda));
    }
    if lambda > CRITICAL_MASS * (1.0 + 1e-12) {
        return Err(EnergyError::Supercritical(lambda));
    }
    let v = potential_from_mass(&profile);
    let f = free_energy_parts(u.grid(), u.values(), v.values(), lambda)
        .0
        .value;
    Ok(f - lambda * (lambda / PI).ln())
}

/// A seeded random radial density: a constant plus one to three Gaussian
/// bumps in `ξ = r²` (so the density is smooth on the disk), rejection-sampled
/// for nonnegativity and rescaled to mass `lambda`.
pub fn random_profile<R: Rng>(rng: &mut R, grid: Arc<Grid>, lambda: f64) -> RadialField {
    loop {
        let base: f64 = rng.gen_range(0.0..1.0);
        let bumps: Vec<(f64, f64, f64)> = (0..rng.gen_range(1..=3))
            .map(|_| {
                (
                    rng.gen_range(-1.0..3.0),
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.02..0.3),
                )
            })
            .collect();
        let values: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&x| {
                base + bumps
                    .iter()
                    .map(|&(amp, c, w)| amp * (-(x - c) * (x - c) / (2.0 * w * w)).exp())
                    .sum::<f64>()
            })
            .collect();
        if values.iter().any(|&v| v < 0.0) {
            continue;
        }
        let field =
            RadialField::density(grid.clone(), values).expect("nonnegative by construction");
        let mass = field.disk_integral().value;
        if mass <= 1e-8 {
            continue;
        }
        let scale = lambda / mass;
        let scaled = field.values().iter().map(|v| v * scale).collect();
        return RadialField::density(grid.clone(), scaled).expect("scaled density");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radial::{potential_from_mass, preset_profile, Preset};
    use crate::solver::{simulate, SchemeConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_state_energy() {
        let g = Grid::uniform(64).unwrap();
        let m = CRITICAL_MASS;
        let u = RadialField::density(g.clone(), vec![m / PI; g.len()]).unwrap();
        let v = RadialField::potential(g.clone(), vec![0.0; g.len()]).unwrap();
        let f = free_energy(&u, &v).unwrap();
        let expected = 8.0 * PI * 8f64.ln();
        assert!((expected - 52.26).abs() < 5e-3);
        assert!((f - expected).abs() < 1e-12);
        assert!(dissipation(&u, &v).unwrap().abs() < 1e-20);

        let one = RadialField::density(g.clone(), vec![1.0; g.len()]).unwrap();
        assert!(free_energy(&one, &v).unwrap().abs() < 1e-15);
    }

    #[test]
    fn pks_energy_exceeds_constant_state() {
        let g = Grid::graded(1024, 2.0).unwrap();
        let m = CRITICAL_MASS;
        let p = preset_profile(Preset::Pks { lambda: 1.0 }, m, g).unwrap();
        let r = energy_report(&p);
        assert!(r.energy > 8.0 * PI * 8f64.ln() + 1e-3, "{}", r.energy);
        assert!(r.dissipation > 0.0);
        assert_eq!(r.clamp_count, 0);
    }

    #[test]
    fn boltzmann_states_do_not_dissipate() {
        let g = Grid::graded(512, 2.0).unwrap();
        let v =
            RadialField::potential_from_fn(g.clone(), |r| (3.0 * r).cos() - 0.2 * r * r).unwrap();
        let u_vals: Vec<f64> = v.values().iter().map(|x| 2.5 * x.exp()).collect();
        let u = RadialField::density(g.clone(), u_vals).unwrap();
        let d = dissipation(&u, &v).unwrap();
        assert!(d.abs() < 1e-12, "{d}");
    }

    #[test]
    fn dissipation_is_nonnegative_for_arbitrary_pairs() {
        let g = Grid::graded(256, 2.0).unwrap();
        let u = RadialField::density_from_fn(g.clone(), |r| 1.0 + (5.0 * r).sin().powi(2)).unwrap();
        let v = RadialField::potential_from_fn(g.clone(), |r| r.powi(3)).unwrap();
        assert!(dissipation(&u, &v).unwrap() >= 0.0);
    }

    #[test]
    fn report_and_field_routes_agree() {
        let g = Grid::graded(2048, 2.0).unwrap();
        let p = preset_profile(Preset::Pks { lambda: 0.7 }, 6.0, g).unwrap();
        let rep = energy_report(&p);
        let u = density_from_mass(&p);
        let v = potential_from_mass(&p);
        assert!((free_energy(&u, &v).unwrap() - rep.energy).abs() < 1e-12);
        let d = dissipation(&u, &v).unwrap();
        assert!(
            (d - rep.dissipation).abs() < 1e-3 * rep.dissipation,
            "{d} vs {}",
            rep.dissipation
        );
    }

    #[test]
    fn audit_of_exact_exponential_decay() {
        // F = e^{-t}, D = e^{-t}: budget closes up to trapezoid error
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.005).collect();
        let f: Vec<f64> = t.iter().map(|x| (-x).exp()).collect();
        let a = audit_series(&t, &f, &f);
        assert_eq!(a.max_jump, 0.0);
        assert!(a.budget_residual_rel < 1e-5);
        assert!((a.rows[500].dfdt_est + (-2.5f64).exp()).abs() < 1e-4);
    }

    #[test]
    fn constant_run_audits_to_rounding_level() {
        let g = Grid::uniform(128).unwrap();
        let m = CRITICAL_MASS;
        let mut cfg = SchemeConfig::new(g.clone());
        cfg.t_end = 1.0;
        let trace = simulate(&cfg, &MassProfile::linear(g, m)).unwrap();
        let a = audit_decay(&trace);
        assert!(a.max_jump_rel < 1e-10);
        assert!(a.budget_residual_rel < 1e-10, "{}", a.budget_residual_rel);
    }

    #[test]
    fn loghls_constant_is_equality() {
        let g = Grid::graded(256, 2.0).unwrap();
        let lambda = 5.0;
        let u = RadialField::density(g, vec![lambda / PI; 257]).unwrap();
        assert!(loghls_check(&u).unwrap().abs() < 1e-12);
    }

    #[test]
    fn loghls_rejects_supercritical() {
        let g = Grid::graded(64, 2.0).unwrap();
        let u = RadialField::density(g, vec![10.0; 65]).unwrap();
        assert!(matches!(
            loghls_check(&u),
            Err(EnergyError::Supercritical(_))
        ));
    }

    #[test]
    fn random_profiles_have_target_mass() {
        let g = Grid::graded(256, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let u = random_profile(&mut rng, g.clone(), 7.0);
            assert!((u.disk_integral().value - 7.0).abs() < 1e-12);
            assert!(u.values().iter().all(|&x| x >= 0.0));
        }
    }
}
