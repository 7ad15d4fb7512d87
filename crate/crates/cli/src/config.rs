//! Experiment configuration: a flat dotted-key TOML document.
//!
//! ```toml
//! mass = "8pi"
//! seed = 7
//! grid.n = 1024
//! grid.gamma = 2.0
//! scheme.t_end = 50.0
//! initial.kind = "pks"
//! initial.lambda = 0.05
//! output.dir = "run4"
//! output.snapshot_every = 1.0
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use jlchemo_core::energy::random_profile;
use jlchemo_core::radial::mass_from_density;
use jlchemo_core::radial::{preset_profile, Grid, MassProfile, Preset};
use jlchemo_core::solver::{Advection, SchemeConfig, Verdict};
use jlchemo_core::PI;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use toml::Value;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("malformed document: {0}")]
    Syntax(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("key `{key}` does not apply to initial.kind = \"{kind}\"")]
    Inapplicable { key: String, kind: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        reason: reason.into(),
    }
}

const KEYS: &[&str] = &[
    "mass",
    "seed",
    "grid.n",
    "grid.gamma",
    "scheme.dt0",
    "scheme.cfl",
    "scheme.t_end",
    "scheme.dt_min",
    "scheme.dt_max",
    "scheme.growth",
    "scheme.spike_factor",
    "scheme.u_blowup_threshold",
    "scheme.advection",
    "initial.kind",
    "initial.lambda",
    "initial.a",
    "output.dir",
    "output.snapshot_every",
    "expect.verdict",
];

/// Parses a number, accepting multiples of π written as `pi`, `8pi`, `2.5pi`
/// or `8*pi`.
pub fn parse_number(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Some(head) = t.strip_suffix("pi") {
        let head = head.trim().trim_end_matches('*').trim();
        let k = if head.is_empty() {
            1.0
        } else {
            head.parse::<f64>().ok()?
        };
        return Some(k * PI);
    }
    t.parse::<f64>().ok()
}

/// Initial data: a core preset or a seeded random density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Initial {
    Preset(Preset),
    Random,
}

impl Initial {
    pub fn describe(&self) -> String {
        match self {
            Initial::Preset(p) => p.to_string(),
            Initial::Random => "random".to_string(),
        }
    }
}

/// The expected outcome of a run; a mismatch exits with status 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Completed,
    Blowup,
}

impl Expectation {
    pub fn matches(&self, verdict: &Verdict) -> bool {
        match self {
            Expectation::Completed => matches!(verdict, Verdict::Completed),
            Expectation::Blowup => !matches!(verdict, Verdict::Completed),
        }
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mass: f64,
    pub seed: u64,
    pub n: usize,
    pub gamma: f64,
    pub scheme: SchemeConfig,
    pub initial: Initial,
    pub out_dir: PathBuf,
    pub expect: Option<Expectation>,
    raw: BTreeMap<String, Value>,
}

fn flatten(
    prefix: &str,
    table: &toml::Table,
    out: &mut BTreeMap<String, Value>,
) -> Result<(), ConfigError> {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out)?,
            other => {
                out.insert(key, other.clone());
            }
        }
    }
    Ok(())
}

/// Parses `key=value` as a TOML value, falling back to a bare string.
pub fn parse_override(text: &str) -> Result<(String, Value), ConfigError> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::Syntax(format!("override `{text}` is not key=value")))?;
    let key = key.trim().to_string();
    let value = value.trim();
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(value.to_string()));
    Ok((key, parsed))
}

fn number(raw: &BTreeMap<String, Value>, key: &str) -> Result<Option<f64>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some(Value::Float(x)) => Ok(Some(*x)),
        Some(Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(Value::String(s)) => parse_number(s)
            .map(Some)
            .ok_or_else(|| invalid(key, format!("`{s}` is not a number"))),
        Some(other) => Err(invalid(
            key,
            format!("expected a number, found {}", other.type_str()),
        )),
    }
}

fn string<'a>(raw: &'a BTreeMap<String, Value>, key: &str) -> Result<Option<&'a str>, ConfigError> {
    match raw.get(key) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(invalid(
            key,
            format!("expected a string, found {}", other.type_str()),
        )),
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(invalid(
            key,
            format!("must be positive and finite, got {x}"),
        ))
    }
}

fn integer(key: &str, x: f64) -> Result<u64, ConfigError> {
    if x.is_finite() && x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(invalid(
            key,
            format!("must be a nonnegative integer, got {x}"),
        ))
    }
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn parse(document: &str) -> Result<Self, ConfigError> {
        Self::parse_with(document, &[])
    }

    /// Parses a document, then applies `key=value` overrides.
    pub fn parse_with(document: &str, overrides: &[(String, Value)]) -> Result<Self, ConfigError> {
        let table: toml::Table = document
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Syntax(e.message().to_string()))?;
        let mut raw = BTreeMap::new();
        flatten("", &table, &mut raw)?;
        for (k, v) in overrides {
            raw.insert(k.clone(), v.clone());
        }
        Self::from_raw(raw)
    }

    /// A copy with one key replaced, revalidated.
    pub fn with(&self, key: &str, value: Value) -> Result<Self, ConfigError> {
        let mut raw = self.raw.clone();
        raw.insert(key.to_string(), value);
        Self::from_raw(raw)
    }

    fn from_raw(raw: BTreeMap<String, Value>) -> Result<Self, ConfigError> {
        if let Some(k) = raw.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(ConfigError::UnknownKey(k.clone()));
        }
        let mass = number(&raw, "mass")?.ok_or(ConfigError::Missing("mass"))?;
        let mass = positive("mass", mass)?;
        let seed = number(&raw, "seed")?
            .map(|x| integer("seed", x))
            .transpose()?
            .unwrap_or(0);

        let n = number(&raw, "grid.n")?
            .map(|x| integer("grid.n", x))
            .transpose()?
            .unwrap_or(512) as usize;
        let gamma = number(&raw, "grid.gamma")?.unwrap_or(1.0);
        let grid = Grid::graded(n, gamma).map_err(|e| invalid("grid", e.to_string()))?;

        let mut scheme = SchemeConfig::new(grid);
        let set = |key: &str, slot: &mut f64| -> Result<(), ConfigError> {
            if let Some(x) = number(&raw, key)? {
                *slot = positive(key, x)?;
            }
            Ok(())
        };
        set("scheme.dt0", &mut scheme.dt0)?;
        set("scheme.cfl", &mut scheme.cfl)?;
        set("scheme.t_end", &mut scheme.t_end)?;
        set("scheme.dt_min", &mut scheme.dt_min)?;
        set("scheme.dt_max", &mut scheme.dt_max)?;
        set("scheme.growth", &mut scheme.growth)?;
        set("scheme.spike_factor", &mut scheme.spike_factor)?;
        set("output.snapshot_every", &mut scheme.snapshot_every)?;
        if let Some(x) = number(&raw, "scheme.u_blowup_threshold")? {
            scheme.u_blowup_threshold = Some(positive("scheme.u_blowup_threshold", x)?);
        }
        if let Some(s) = string(&raw, "scheme.advection")? {
            scheme.advection = match s {
                "corrected" => Advection::Corrected,
                "upwind" => Advection::Upwind,
                other => {
                    return Err(invalid(
                        "scheme.advection",
                        format!("expected \"corrected\" or \"upwind\", got \"{other}\""),
                    ))
                }
            };
        }
        scheme
            .validate()
            .map_err(|e| invalid("scheme", e.to_string()))?;

        let kind = string(&raw, "initial.kind")?
            .unwrap_or("constant")
            .to_string();
        let lambda = number(&raw, "initial.lambda")?;
        let a = number(&raw, "initial.a")?;
        let reject = |key: &str, present: bool| {
            if present {
                Err(ConfigError::Inapplicable {
                    key: key.to_string(),
                    kind: kind.clone(),
                })
            } else {
                Ok(())
            }
        };
        let initial = match kind.as_str() {
            "constant" | "random" => {
                reject("initial.lambda", lambda.is_some())?;
                reject("initial.a", a.is_some())?;
                if kind == "constant" {
                    Initial::Preset(Preset::Constant)
                } else {
                    Initial::Random
                }
            }
            "pks" => {
                reject("initial.a", a.is_some())?;
                Initial::Preset(Preset::Pks {
                    lambda: positive("initial.lambda", lambda.unwrap_or(1.0))?,
                })
            }
            "barrier" => {
                reject("initial.lambda", lambda.is_some())?;
                Initial::Preset(Preset::Barrier {
                    a: positive("initial.a", a.unwrap_or(1.0))?,
                })
            }
            other => return Err(ConfigError::UnknownPreset(other.to_string())),
        };

        let out_dir = PathBuf::from(string(&raw, "output.dir")?.unwrap_or("out"));
        let expect = match string(&raw, "expect.verdict")? {
            None => None,
            Some("completed") => Some(Expectation::Completed),
            Some("blowup_detected") | Some("blowup") => Some(Expectation::Blowup),
            Some(other) => {
                return Err(invalid(
                    "expect.verdict",
                    format!("expected \"completed\" or \"blowup_detected\", got \"{other}\""),
                ))
            }
        };

        Ok(ExperimentConfig {
            mass,
            seed,
            n,
            gamma,
            scheme,
            initial,
            out_dir,
            expect,
            raw,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.scheme.grid
    }

    /// Samples the initial mass profile.
    pub fn initial_profile(&self) -> MassProfile {
        match self.initial {
            Initial::Preset(p) => preset_profile(p, self.mass, self.grid().clone())
                .expect("preset and mass validated at parse time"),
            Initial::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let u = random_profile(&mut rng, self.grid().clone(), self.mass);
                let p = mass_from_density(&u).expect("random densities are nonnegative");
                // pin the total to the configured mass exactly
                let scale = self.mass / p.total_mass();
                let vals = p.values().iter().map(|v| v * scale).collect();
                MassProfile::new(self.grid().clone(), vals, self.mass)
                    .expect("rescaled profile stays valid")
            }
        }
    }
}
