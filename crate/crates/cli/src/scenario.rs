//! Named end-to-end scenarios.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use jlchemo_core::energy::random_profile;
use jlchemo_core::radial::{mass_from_density, preset_profile, MassProfile, Preset};
use jlchemo_core::solver::Verdict;
use jlchemo_core::PI;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use toml::Value;

use crate::check::run_checks;
use crate::config::ExperimentConfig;
use crate::probes::{mass_label, SteadyProbe};
use crate::run::{run_simulation, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    VerifyGlobal,
    Dichotomy,
    Uniqueness,
    Check,
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "verify-global" => Ok(Scenario::VerifyGlobal),
            "dichotomy" => Ok(Scenario::Dichotomy),
            "uniqueness" => Ok(Scenario::Uniqueness),
            "check" => Ok(Scenario::Check),
            other => Err(format!(
                "unknown scenario `{other}` (expected verify-global, dichotomy, uniqueness or check)"
            )),
        }
    }
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::VerifyGlobal => "verify-global",
            Scenario::Dichotomy => "dichotomy",
            Scenario::Uniqueness => "uniqueness",
            Scenario::Check => "check",
        }
    }

    /// The configuration used when none is given.
    pub fn default_document(&self) -> &'static str {
        match self {
            Scenario::VerifyGlobal => {
                "mass = \"8pi\"\ngrid.n = 1024\ngrid.gamma = 2.0\nscheme.t_end = 50.0\n\
                 initial.kind = \"pks\"\ninitial.lambda = 0.05\noutput.snapshot_every = 1.0\n"
            }
            Scenario::Dichotomy => {
                "mass = \"8pi\"\ngrid.n = 512\ngrid.gamma = 3.0\nscheme.t_end = 10.0\n\
                 initial.kind = \"pks\"\ninitial.lambda = 0.05\n"
            }
            Scenario::Uniqueness => "mass = \"8pi\"\ngrid.n = 512\ngrid.gamma = 2.0\n",
            Scenario::Check => "mass = \"8pi\"\n",
        }
    }
}

/// Outcome of a scenario: its summary and whether every expectation held.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub summary: Summary,
    pub pass: bool,
}

fn finish(
    dir: &Path,
    scenario: Scenario,
    mut summary: Summary,
    pass: bool,
) -> Result<ScenarioReport> {
    summary
        .0
        .insert(0, ("scenario".into(), scenario.name().into()));
    summary.push("expectations", if pass { "pass" } else { "fail" });
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    summary.write(&dir.join("summary.txt"))?;
    Ok(ScenarioReport { summary, pass })
}

fn verify_global(config: &ExperimentConfig) -> Result<ScenarioReport> {
    let run = run_simulation(config)?;
    let completed = matches!(run.trace.verdict, Verdict::Completed);
    let confined = matches!(&run.confinement, Some(Ok(c)) if c.pass);
    finish(
        &config.out_dir,
        Scenario::VerifyGlobal,
        run.summary,
        completed && confined,
    )
}

fn dichotomy(config: &ExperimentConfig) -> Result<ScenarioReport> {
    let dir = config.out_dir.clone();
    let sub = |name: &str, k: f64| -> Result<ExperimentConfig> {
        Ok(config.with("mass", Value::Float(k * PI))?.with(
            "output.dir",
            Value::String(dir.join(name).to_string_lossy().into_owned()),
        )?)
    };
    let critical = sub("critical", 8.0)?;
    let supercritical = sub("supercritical", 10.0)?;
    let (a, b) = rayon::join(
        || run_simulation(&critical),
        || run_simulation(&supercritical),
    );
    let (a, b) = (a?, b?);
    let mut s = Summary::default();
    s.push("initial", config.initial.describe());
    s.push("critical_verdict", a.trace.verdict.name());
    s.num(
        "critical_final_sup_distance",
        a.longtime.final_rel_distance(),
    );
    s.num(
        "critical_energy_budget_residual",
        a.audit.budget_residual_rel,
    );
    s.push(
        "critical_barrier_a",
        a.summary.get("barrier_a").unwrap_or("none"),
    );
    s.push(
        "critical_barrier_confinement",
        a.summary.get("barrier_confinement").unwrap_or("none"),
    );
    s.push("supercritical_verdict", b.trace.verdict.name());
    s.push(
        "supercritical_blowup_time",
        b.summary.get("blowup_time").unwrap_or("none"),
    );
    s.push(
        "supercritical_peak_node",
        b.summary.get("peak_node").unwrap_or("none"),
    );
    let pass = matches!(a.trace.verdict, Verdict::Completed)
        && matches!(b.trace.verdict, Verdict::BlowupDetected(_));
    finish(&dir, Scenario::Dichotomy, s, pass)
}

/// The initial data used by the uniqueness probes at mass `m`.
pub fn probe_inits(config: &ExperimentConfig, m: f64) -> Vec<(String, MassProfile)> {
    let g = config.grid().clone();
    let mut inits = Vec::new();
    for lambda in [0.05, 0.2, 1.0, 5.0] {
        let p = preset_profile(Preset::Pks { lambda }, m, g.clone()).expect("valid preset");
        inits.push((format!("pks{lambda}"), p));
    }
    for a in [0.01, 0.1, 1.0, 10.0] {
        let p = preset_profile(Preset::Barrier { a }, m, g.clone()).expect("valid preset");
        inits.push((format!("barrier{a}"), p));
    }
    for seed in [1u64, 2] {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(seed));
        let p = mass_from_density(&random_profile(&mut rng, g.clone(), m)).expect("nonnegative");
        let vals = p.values().iter().map(|v| v * m / p.total_mass()).collect();
        inits.push((
            format!("random{seed}"),
            MassProfile::new(g.clone(), vals, m).expect("rescaled profile"),
        ));
    }
    inits
}

fn uniqueness(config: &ExperimentConfig) -> Result<ScenarioReport> {
    let dir = &config.out_dir;
    let masses = [1.0, 2.0, 4.0, 8.0, 10.0].map(|k| k * PI);
    let jobs: Vec<(f64, String, MassProfile)> = masses
        .iter()
        .flat_map(|&m| {
            probe_inits(config, m)
                .into_iter()
                .map(move |(t, p)| (m, t, p))
        })
        .collect();
    let probes: Vec<(f64, String, Result<SteadyProbe, String>)> = jobs
        .into_par_iter()
        .map(|(m, tag, init)| {
            let probe = SteadyProbe::run(&init).map_err(|e| format!("{e:#}"));
            (m, tag, probe)
        })
        .collect();
    let mut s = Summary::default();
    let mut pass = true;
    for &m in &masses {
        let mut unique = 0;
        let mut total = 0;
        let mut worst: f64 = 0.0;
        for (_, tag, probe) in probes.iter().filter(|(pm, _, _)| *pm == m) {
            total += 1;
            if let Ok(p) = probe {
                p.write(dir, Some(tag))?;
                worst = worst.max(p.newton.distance() / m);
                if p.unique() {
                    unique += 1;
                }
            }
        }
        let label = mass_label(m);
        let exploratory = m > 8.0 * PI;
        s.push(&format!("m_{label}_unique"), format!("{unique}/{total}"));
        s.num(&format!("m_{label}_max_rel_distance"), worst);
        if exploratory {
            s.push(&format!("m_{label}_status"), "exploratory");
        } else if unique != total {
            pass = false;
        }
    }
    finish(dir, Scenario::Uniqueness, s, pass)
}

fn check(config: &ExperimentConfig) -> Result<ScenarioReport> {
    let results = run_checks();
    let mut s = Summary::default();
    for r in &results {
        println!("{}", r.line());
        s.push(
            &r.name.replace(' ', "_"),
            if r.pass { "pass" } else { "fail" },
        );
    }
    let pass = results.iter().all(|r| r.pass);
    finish(&config.out_dir, Scenario::Check, s, pass)
}

pub fn run_scenario(scenario: Scenario, config: &ExperimentConfig) -> Result<ScenarioReport> {
    match scenario {
        Scenario::VerifyGlobal => {
            if config.mass > 8.0 * PI * (1.0 + 1e-12) {
                bail!("verify-global needs m <= 8pi, got {}", config.mass);
            }
            verify_global(config)
        }
        Scenario::Dichotomy => dichotomy(config),
        Scenario::Uniqueness => uniqueness(config),
        Scenario::Check => check(config),
    }
}
