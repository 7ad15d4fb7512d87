//! A fast invariant suite over all modules.

use jlchemo_core::barriers::{residual_super_closed_form, Family};
use jlchemo_core::energy::{audit_decay, loghls_check, random_profile};
use jlchemo_core::radial::numerics::trapezoid;
use jlchemo_core::radial::{
    density_from_mass, mass_from_density, preset_profile, second_moment, Grid, MassProfile, Preset,
};
use jlchemo_core::solver::{simulate, step, verify_discrete_comparison, SchemeConfig, Verdict};
use jlchemo_core::{CRITICAL_MASS, PI};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::probes::{audit_family, AuditGrid, SteadyProbe};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckResult {
    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.pass { "pass" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

fn result(name: &'static str, pass: bool, detail: String) -> CheckResult {
    CheckResult { name, pass, detail }
}

fn barrier_audit() -> CheckResult {
    let g = AuditGrid::new(
        1e-3,
        1e3,
        10,
        (1..=8).step_by(2).map(|k| k as f64 * PI).collect(),
        20,
    );
    let mut pass = true;
    let mut detail = Vec::new();
    for fam in [Family::Super, Family::Sub] {
        match audit_family(fam, &g) {
            Ok(s) => {
                pass &= s.pass();
                detail.push(format!(
                    "{fam:?}: {} sign errors, fd {:.2e}, analytic {:.2e}",
                    s.sign_violations, s.max_rel_fd, s.max_rel_analytic
                ));
            }
            Err(e) => {
                pass = false;
                detail.push(format!("{fam:?}: {e}"));
            }
        }
    }
    result("barrier residual audit", pass, detail.join("; "))
}

fn sign_flip() -> CheckResult {
    let m = 10.0 * PI;
    // an odd cell count keeps the root off the nodes
    let n = 997;
    let cell = (1..n).find(|&k| {
        let (x0, x1) = ((k - 1) as f64 / n as f64, k as f64 / n as f64);
        residual_super_closed_form(1.0, m, x0) < 0.0 && residual_super_closed_form(1.0, m, x1) > 0.0
    });
    let root = (m - CRITICAL_MASS) / m;
    let pass =
        cell.is_some_and(|k| ((k - 1) as f64 / n as f64) <= root && root <= k as f64 / n as f64);
    result(
        "supercritical sign flip",
        pass,
        format!("flip in cell {cell:?}, root {root}"),
    )
}

fn boundaries_and_fixed_point() -> CheckResult {
    let g = Grid::graded(128, 2.0).unwrap();
    let m = CRITICAL_MASS;
    let lin = MassProfile::linear(g.clone(), m);
    let fixed = step(&lin, 1e-2)
        .map(|o| o.profile.max_abs_diff(&lin))
        .unwrap_or(f64::INFINITY);
    let p = preset_profile(Preset::Pks { lambda: 0.3 }, m, g).unwrap();
    let out = step(&p, 1e-5).map(|o| o.profile);
    let exact = out
        .as_ref()
        .map(|o| o.values()[0] == 0.0 && *o.values().last().unwrap() == m)
        .unwrap_or(false);
    result(
        "boundary exactness and steady fixed point",
        exact && fixed <= 1e-12 * m,
        format!("endpoints exact {exact}, drift of mξ {fixed:.2e}"),
    )
}

fn comparison() -> CheckResult {
    let g = Grid::uniform(128).unwrap();
    let cfg = SchemeConfig::new(g.clone());
    let mut worst: f64 = 0.0;
    let m = 6.0 * PI;
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = mass_from_density(&random_profile(&mut rng, g.clone(), m)).unwrap();
        let b = mass_from_density(&random_profile(&mut rng, g.clone(), m)).unwrap();
        let total = a.total_mass();
        let bv: Vec<f64> = b
            .values()
            .iter()
            .map(|v| v * total / b.total_mass())
            .collect();
        let b = MassProfile::new(g.clone(), bv, total).unwrap();
        let lo: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x.min(*y))
            .collect();
        let hi: Vec<f64> = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| x.max(*y))
            .collect();
        let lo = MassProfile::new(g.clone(), lo, total).unwrap();
        let hi = MassProfile::new(g.clone(), hi, total).unwrap();
        match verify_discrete_comparison(&lo, &hi, 0.1, &cfg) {
            Ok(r) => worst = worst.max(r.max_violation / total),
            Err(_) => worst = f64::INFINITY,
        }
    }
    result(
        "discrete comparison",
        worst <= 1e-10,
        format!("max violation / m = {worst:.2e}"),
    )
}

fn moment_identity() -> CheckResult {
    let g = Grid::graded(512, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let u = random_profile(&mut rng, g.clone(), 5.0);
        let p = mass_from_density(&u).unwrap();
        let lhs = second_moment(&p);
        let weighted: Vec<f64> = u
            .values()
            .iter()
            .zip(g.nodes())
            .map(|(v, x)| v * x)
            .collect();
        let rhs = trapezoid(&g, &weighted);
        let ratio = (lhs.value - PI * rhs.value).abs() / (10.0 * (lhs.error + PI * rhs.error));
        worst = worst.max(ratio);
    }
    result(
        "second-moment identity",
        worst <= 1.0,
        format!("worst |gap| / (10 x truncation) = {worst:.3}"),
    )
}

fn loghls() -> CheckResult {
    let g = Grid::graded(512, 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = f64::INFINITY;
    for k in 0..10 {
        let lambda = CRITICAL_MASS * (k as f64 + 1.0) / 10.0;
        let u = random_profile(&mut rng, g.clone(), lambda);
        worst = worst.min(loghls_check(&u).unwrap_or(f64::NEG_INFINITY));
    }
    result(
        "log-HLS margin",
        worst >= -1e-6,
        format!("smallest margin {worst:.3e}"),
    )
}

fn newton() -> CheckResult {
    let g = Grid::graded(256, 2.0).unwrap();
    let init = preset_profile(Preset::Barrier { a: 0.1 }, 2.0 * PI, g).unwrap();
    match SteadyProbe::run(&init) {
        Ok(p) => result("stationary uniqueness probe", p.unique(), p.describe()),
        Err(e) => result("stationary uniqueness probe", false, e.to_string()),
    }
}

fn short_critical_run() -> CheckResult {
    let g = Grid::graded(256, 2.0).unwrap();
    let m = CRITICAL_MASS;
    let init = preset_profile(Preset::Pks { lambda: 0.2 }, m, g.clone()).unwrap();
    let mut cfg = SchemeConfig::new(g);
    cfg.t_end = 1.0;
    cfg.snapshot_every = 0.25;
    match simulate(&cfg, &init) {
        Ok(trace) => {
            let audit = audit_decay(&trace);
            let u = density_from_mass(&trace.final_profile);
            let pass = matches!(trace.verdict, Verdict::Completed)
                && audit.max_jump_rel <= 1e-6
                && u.values().iter().all(|v| v.is_finite());
            result(
                "critical run energy decay",
                pass,
                format!(
                    "verdict {}, max jump {:.2e}, budget residual {:.2e}",
                    trace.verdict.name(),
                    audit.max_jump_rel,
                    audit.budget_residual_rel
                ),
            )
        }
        Err(e) => result("critical run energy decay", false, e.to_string()),
    }
}

/// Runs every check; order is fixed.
pub fn run_checks() -> Vec<CheckResult> {
    vec![
        barrier_audit(),
        sign_flip(),
        boundaries_and_fixed_point(),
        comparison(),
        moment_identity(),
        loghls(),
        newton(),
        short_critical_run(),
    ]
}
