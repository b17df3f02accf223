//! Experiment configuration: a TOML file with top-level `experiment`, `seed`
//! and `output_dir` keys and a `[params]` table checked against the schema of
//! the named experiment.
//!
//! ```toml
//! experiment = "chapman"
//! seed = 7
//! output_dir = "runs"
//!
//! [params]
//! rel_tol = 1e-3
//! ```
//!
//! Values resolve as defaults < file < explicit overrides.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiments::{
    chapman::ChapmanParams, chapman_mc::ChapmanMcParams, drift::DriftParams, polymer_fit::PolymerFitParams,
    rn_trend::RnTrendParams, scaling::ScalingParams, semigroup::SemigroupParams, she_mean::SheMeanParams,
    she_var::SheVarTrendParams,
};
use crate::HarnessError;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_OUTPUT_DIR: &str = "shf-runs";

/// Per-experiment parameter schema.
pub trait Schema: Serialize + DeserializeOwned + Default + Clone + PartialEq {
    /// Unit of each parameter.
    const UNITS: &'static [(&'static str, &'static str)];

    fn validate(&self) -> Result<(), String>;
}

macro_rules! experiments {
    ($($var:ident($ty:ty) = $name:literal),* $(,)?) => {
        #[derive(Debug, Clone, PartialEq)]
        pub enum Params {
            $($var($ty)),*
        }

        /// Names accepted by [`ExperimentConfig::defaults`].
        pub const EXPERIMENTS: &[&str] = &[$($name),*];

        impl Params {
            pub fn name(&self) -> &'static str {
                match self {
                    $(Params::$var(_) => $name),*
                }
            }

            pub fn defaults(name: &str) -> Result<Params, HarnessError> {
                match name {
                    $($name => Ok(Params::$var(<$ty>::default())),)*
                    _ => Err(HarnessError::Config(format!(
                        "unknown experiment '{name}', expected one of {}",
                        EXPERIMENTS.join(", ")
                    ))),
                }
            }

            fn to_table(&self) -> toml::Table {
                let v = match self {
                    $(Params::$var(p) => toml::Table::try_from(p),)*
                };
                v.expect("parameter structs serialize to a table")
            }

            fn from_table(name: &str, table: toml::Table) -> Result<Params, HarnessError> {
                let bad = |e: toml::de::Error| HarnessError::Config(format!("[params] for {name}: {}", e.message()));
                let p = match name {
                    $($name => Params::$var(table.try_into().map_err(bad)?),)*
                    _ => return Params::defaults(name),
                };
                Ok(p)
            }

            pub fn validate(&self) -> Result<(), HarnessError> {
                let r = match self {
                    $(Params::$var(p) => p.validate(),)*
                };
                r.map_err(|e| HarnessError::Config(format!("{}: {e}", self.name())))
            }

            pub fn units(&self) -> &'static [(&'static str, &'static str)] {
                match self {
                    $(Params::$var(_) => <$ty as Schema>::UNITS,)*
                }
            }

            pub fn to_json(&self) -> serde_json::Value {
                let v = match self {
                    $(Params::$var(p) => serde_json::to_value(p),)*
                };
                v.expect("parameter structs serialize to JSON")
            }
        }
    };
}

experiments! {
    Semigroup(SemigroupParams) = "semigroup",
    Scaling(ScalingParams) = "scaling",
    Chapman(ChapmanParams) = "chapman",
    SheMean(SheMeanParams) = "she-mean",
    SheVarTrend(SheVarTrendParams) = "she-var-trend",
    ChapmanMc(ChapmanMcParams) = "chapman-mc",
    PolymerFit(PolymerFitParams) = "polymer-fit",
    Drift(DriftParams) = "drift",
    RnTrend(RnTrendParams) = "rn-trend",
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: Params,
    pub seed: u64,
    pub output_dir: PathBuf,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<String>,
    seed: Option<u64>,
    output_dir: Option<PathBuf>,
    #[serde(default)]
    params: toml::Table,
}

/// Values given explicitly, e.g. on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    /// `key = value` pairs for the `[params]` table; values use TOML syntax.
    pub params: Vec<(String, String)>,
}

fn parse_literal(key: &str, text: &str) -> Result<toml::Value, HarnessError> {
    let doc: toml::Table = format!("v = {text}")
        .parse()
        .map_err(|_| HarnessError::Config(format!("cannot parse value '{text}' for '{key}'")))?;
    Ok(doc["v"].clone())
}

impl ExperimentConfig {
    pub fn defaults(name: &str) -> Result<Self, HarnessError> {
        Ok(ExperimentConfig {
            params: Params::defaults(name)?,
            seed: DEFAULT_SEED,
            output_dir: PathBuf::from(DEFAULT_OUTPUT_DIR),
        })
    }

    pub fn name(&self) -> &'static str {
        self.params.name()
    }

    /// Resolves a configuration. `name` and the file's `experiment` key must
    /// agree when both are given.
    pub fn resolve(name: Option<&str>, file: Option<&str>, over: &Overrides) -> Result<Self, HarnessError> {
        let parsed: ConfigFile = match file {
            Some(text) => toml::from_str(text).map_err(|e| HarnessError::Config(format!("config file: {}", e.message())))?,
            None => ConfigFile::default(),
        };
        let name = match (name, parsed.experiment.as_deref()) {
            (Some(a), Some(b)) if a != b => {
                return Err(HarnessError::Config(format!(
                    "the command names experiment '{a}' but the config file sets experiment = '{b}'"
                )))
            }
            (Some(a), _) => a.to_string(),
            (None, Some(b)) => b.to_string(),
            (None, None) => return Err(HarnessError::Config("no experiment named".into())),
        };
        let mut table = Params::defaults(&name)?.to_table();
        for (k, v) in parsed.params {
            table.insert(k, v);
        }
        for (k, v) in &over.params {
            table.insert(k.clone(), parse_literal(k, v)?);
        }
        let params = Params::from_table(&name, table)?;
        params.validate()?;
        Ok(ExperimentConfig {
            params,
            seed: over.seed.or(parsed.seed).unwrap_or(DEFAULT_SEED),
            output_dir: over
                .output_dir
                .clone()
                .or(parsed.output_dir)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        })
    }

    pub fn load(name: Option<&str>, path: &Path, over: &Overrides) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::resolve(name, Some(&text), over)
    }

    pub fn to_toml(&self) -> String {
        let mut doc = toml::Table::new();
        doc.insert("experiment".into(), self.name().into());
        doc.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        doc.insert("output_dir".into(), self.output_dir.display().to_string().into());
        doc.insert("params".into(), toml::Value::Table(self.params.to_table()));
        toml::to_string(&doc).expect("config serializes")
    }

    /// As [`Self::to_toml`] with the unit of each parameter as a comment.
    pub fn to_toml_documented(&self) -> String {
        let mut s = format!("experiment = \"{}\"\nseed = {}\noutput_dir = {}\n\n[params]\n", self.name(), self.seed,
            toml::Value::from(self.output_dir.display().to_string()));
        let units = self.params.units();
        for (k, v) in self.params.to_table() {
            let unit = units.iter().find(|u| u.0 == k).map_or("", |u| u.1);
            s.push_str(&format!("{k} = {v} # {unit}\n"));
        }
        s
    }

    /// Everything that affects the numbers of a run.
    pub fn identity(&self) -> serde_json::Value {
        let mut m = BTreeMap::new();
        m.insert("experiment", serde_json::Value::from(self.name()));
        m.insert("seed", self.seed.into());
        m.insert("code_version", shf_core::io::CODE_VERSION.into());
        m.insert("params", self.params.to_json());
        serde_json::to_value(m).expect("identity serializes")
    }

    /// SHA-256 of the canonical JSON of [`Self::identity`].
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.identity()).expect("identity serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

pub(crate) fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

pub(crate) fn positive(name: &str, v: f64) -> Result<(), String> {
    check(v > 0.0 && v.is_finite(), || format!("{name} must be positive and finite, got {v}"))
}

pub(crate) fn finite(name: &str, v: f64) -> Result<(), String> {
    check(v.is_finite(), || format!("{name} must be finite, got {v}"))
}

pub(crate) fn at_least(name: &str, v: usize, min: usize) -> Result<(), String> {
    check(v >= min, || format!("{name} must be at least {min}, got {v}"))
}

pub(crate) fn range(name: &str, lo: f64, hi: f64) -> Result<(), String> {
    check(lo.is_finite() && hi.is_finite() && lo <= hi, || format!("{name}: need min <= max, got {lo} > {hi}"))
}

pub(crate) fn epsilon(name: &str, v: f64) -> Result<(), String> {
    check(v > 0.0 && v < 1.0, || format!("{name} must lie in (0, 1), got {v}"))
}
