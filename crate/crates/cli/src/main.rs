use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use jlchemo::check::run_checks;
use jlchemo::config::{parse_override, ExperimentConfig};
use jlchemo::probes::{audit_family, write_audit_csv, AuditGrid, SteadyProbe};
use jlchemo::run::{run_simulation, write_audit};
use jlchemo::scenario::{run_scenario, Scenario};
use jlchemo::sweep::{parse_axis, run_sweep};
use jlchemo_core::barriers::Family;
use jlchemo_core::csv::read_table;
use jlchemo_core::energy::audit_series;
use jlchemo_core::PI;
use toml::Value;

#[derive(Parser)]
#[command(
    name = "jlchemo",
    version,
    about = "Radial chemotaxis experiments at and around the critical mass 8π"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// TOML document with flat dotted keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a key, e.g. `--set mass=10pi`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (overrides `output.dir`).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Super,
    Sub,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation; writes trace.csv, snap_<i>.csv, energy_audit.csv and summary.txt.
    Simulate(ConfigArgs),
    /// Audit barrier residuals: closed form against finite differences.
    Barrier {
        #[arg(long, value_enum, default_value = "both")]
        family: FamilyArg,
        #[arg(long, default_value_t = 1e-3)]
        param_min: f64,
        #[arg(long, default_value_t = 1e3)]
        param_max: f64,
        #[arg(long, default_value_t = 30)]
        count: usize,
        /// Comma-separated masses; `8pi` style tokens allowed. Default: π, 2π, …, 8π.
        #[arg(long)]
        masses: Option<String>,
        #[arg(long, default_value_t = 100)]
        points: usize,
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Newton solve of the stationary problem plus the uniqueness sweep.
    Steady(ConfigArgs),
    /// Recompute the energy audit from a run directory's trace.csv.
    EnergyAudit { dir: PathBuf },
    /// Run a configuration once per value of one key; writes sweep.csv.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Dotted key to vary, e.g. `mass` or `initial.lambda`.
        #[arg(long)]
        axis: String,
        /// Comma-separated values; may be empty.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the fast invariant suite.
    Check,
    /// Run a named scenario: verify-global, dichotomy, uniqueness or check.
    Scenario {
        name: String,
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// Failure classes mapped onto exit codes.
enum Failure {
    Usage(anyhow::Error),
    Mismatch(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

fn load(args: &ConfigArgs, default_document: Option<&str>) -> Result<ExperimentConfig> {
    let document = match (&args.config, default_document) {
        (Some(p), _) => {
            fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?
        }
        (None, Some(d)) => d.to_string(),
        (None, None) => return Err(anyhow!("--config is required")),
    };
    let mut overrides = args
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(out) = &args.out {
        overrides.push((
            "output.dir".into(),
            Value::String(out.to_string_lossy().into_owned()),
        ));
    }
    Ok(ExperimentConfig::parse_with(&document, &overrides)?)
}

fn mismatch_unless(ok: bool, what: &str) -> Result<(), Failure> {
    if ok {
        Ok(())
    } else {
        Err(Failure::Mismatch(what.to_string()))
    }
}

fn energy_audit(dir: &Path) -> Result<(f64, f64)> {
    let path = dir.join("trace.csv");
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let (header, rows) = read_table(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| anyhow!("{} has no `{name}` column", path.display()))
    };
    let (ti, fi, di) = (col("t")?, col("energy")?, col("dissipation")?);
    let pick = |k: usize| rows.iter().map(|r| r[k]).collect::<Vec<f64>>();
    let audit = audit_series(&pick(ti), &pick(fi), &pick(di));
    write_audit(&audit, &dir.join("energy_audit.csv"))?;
    Ok((audit.max_jump_rel, audit.budget_residual_rel))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate(args) => {
            let cfg = load(&args, None)?;
            let out = run_simulation(&cfg)?;
            print!("{}", out.summary.render());
            mismatch_unless(out.meets(&cfg), "run did not meet its expectations")
        }
        Command::Barrier {
            family,
            param_min,
            param_max,
            count,
            masses,
            points,
            out,
        } => {
            let masses = match masses {
                Some(s) => parse_axis(&s).map_err(|e| anyhow!("--masses: {e}"))?,
                None => (1..=8).map(|k| k as f64 * PI).collect(),
            };
            if !(param_min > 0.0 && param_max >= param_min) || count == 0 || points == 0 {
                return Err(anyhow!("need 0 < param-min <= param-max and positive counts").into());
            }
            let grid = AuditGrid::new(param_min, param_max, count, masses, points);
            let families: &[Family] = match family {
                FamilyArg::Super => &[Family::Super],
                FamilyArg::Sub => &[Family::Sub],
                FamilyArg::Both => &[Family::Super, Family::Sub],
            };
            fs::create_dir_all(&out).map_err(anyhow::Error::from)?;
            let mut ok = true;
            for &fam in families {
                let s = audit_family(fam, &grid)?;
                let name = match fam {
                    Family::Super => "barrier_super.csv",
                    Family::Sub => "barrier_sub.csv",
                };
                write_audit_csv(&s, &out.join(name))?;
                println!(
                    "{} {fam:?}: {} rows, {} sign violations, max rel err fd {:.3e}, analytic {:.3e}",
                    if s.pass() { "pass" } else { "FAIL" },
                    s.rows.len(),
                    s.sign_violations,
                    s.max_rel_fd,
                    s.max_rel_analytic
                );
                ok &= s.pass();
            }
            mismatch_unless(ok, "barrier residual audit failed")
        }
        Command::Steady(args) => {
            let cfg = load(&args, None)?;
            let probe = SteadyProbe::run(&cfg.initial_profile())?;
            probe.write(&cfg.out_dir, None)?;
            println!("{}", probe.describe());
            mismatch_unless(
                !probe.in_scope() || probe.unique(),
                "no convergence to the constant steady state",
            )
        }
        Command::EnergyAudit { dir } => {
            let (jump, budget) = energy_audit(&dir)?;
            println!("energy_max_jump_rel={jump:e}\nenergy_budget_residual={budget:e}");
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            jobs,
        } => {
            let cfg = load(&config, None)?;
            let axis_values = parse_axis(&values).map_err(|e| anyhow!("--values: {e}"))?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs.unwrap_or(0))
                .build()
                .map_err(anyhow::Error::from)?;
            let rows = pool.install(|| run_sweep(&cfg, &axis, &axis_values, &cfg.out_dir))?;
            for r in &rows {
                println!("{}", r.render());
            }
            Ok(())
        }
        Command::Check => {
            let results = run_checks();
            for r in &results {
                println!("{}", r.line());
            }
            mismatch_unless(results.iter().all(|r| r.pass), "invariant suite failed")
        }
        Command::Scenario { name, config } => {
            let scenario: Scenario = name.parse().map_err(|e: String| anyhow!(e))?;
            let cfg = load(&config, Some(scenario.default_document()))?;
            let report = run_scenario(scenario, &cfg)?;
            if scenario != Scenario::Check {
                print!("{}", report.summary.render());
            }
            mismatch_unless(report.pass, "scenario expectations not met")
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Mismatch(what)) => {
            eprintln!("verdict mismatch: {what}");
            ExitCode::from(2)
        }
    }
}
