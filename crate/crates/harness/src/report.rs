//! Experiment reports and their run directories.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::cache::CacheEvent;
use crate::HarnessError;

/// Non-finite floats are written as strings so reports survive a JSON round trip.
mod float {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How a check compares its value with the tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// |value/reference − 1| ≤ tolerance
    RelErr,
    /// |value − reference| ≤ tolerance
    AbsErr,
    /// value ≤ tolerance
    AtMost,
    /// value ≥ tolerance
    AtLeast,
    /// value > tolerance
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    #[serde(with = "float")]
    pub value: f64,
    pub reference: Option<f64>,
    pub tolerance: f64,
    pub rule: Rule,
    pub passed: bool,
}

impl Check {
    fn make(name: &str, value: f64, reference: Option<f64>, tolerance: f64, rule: Rule) -> Self {
        let mut c = Check { name: name.to_string(), value, reference, tolerance, rule, passed: false };
        c.passed = c.evaluate();
        c
    }

    pub fn rel(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Self::make(name, value, Some(reference), tolerance, Rule::RelErr)
    }

    pub fn abs(name: &str, value: f64, reference: f64, tolerance: f64) -> Self {
        Self::make(name, value, Some(reference), tolerance, Rule::AbsErr)
    }

    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self::make(name, value, None, tolerance, Rule::AtMost)
    }

    pub fn at_least(name: &str, value: f64, tolerance: f64) -> Self {
        Self::make(name, value, None, tolerance, Rule::AtLeast)
    }

    pub fn above(name: &str, value: f64, tolerance: f64) -> Self {
        Self::make(name, value, None, tolerance, Rule::Above)
    }

    /// A count of violations that must be zero.
    pub fn none_of(name: &str, violations: usize) -> Self {
        Self::make(name, violations as f64, None, 0.0, Rule::AtMost)
    }

    /// The deviation the tolerance is compared against.
    pub fn deviation(&self) -> f64 {
        match (self.rule, self.reference) {
            (Rule::RelErr, Some(r)) => (self.value / r - 1.0).abs(),
            (Rule::AbsErr, Some(r)) => (self.value - r).abs(),
            (Rule::RelErr | Rule::AbsErr, None) => f64::NAN,
            _ => self.value,
        }
    }

    /// Pass/fail from the recorded numbers alone.
    pub fn evaluate(&self) -> bool {
        let d = self.deviation();
        match self.rule {
            Rule::AtLeast => d >= self.tolerance,
            Rule::Above => d > self.tolerance,
            _ => d <= self.tolerance,
        }
    }
}

/// One estimate; serialized as a row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment_id: String,
    pub label: String,
    pub epsilon: Option<f64>,
    pub theta: Option<f64>,
    #[serde(with = "float")]
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub n_paths: Option<usize>,
    pub n_noise: Option<usize>,
    pub seed: u64,
}

impl ResultRow {
    pub fn new(experiment_id: &str, label: &str, estimate: f64, seed: u64) -> Self {
        ResultRow {
            experiment_id: experiment_id.to_string(),
            label: label.to_string(),
            epsilon: None,
            theta: None,
            estimate,
            std_error: None,
            n_paths: None,
            n_noise: None,
            seed,
        }
    }

    pub fn epsilon(mut self, e: f64) -> Self {
        self.epsilon = Some(e);
        self
    }

    pub fn theta(mut self, t: f64) -> Self {
        self.theta = Some(t);
        self
    }

    pub fn se(mut self, se: f64) -> Self {
        self.std_error = Some(se);
        self
    }

    pub fn paths(mut self, n: usize) -> Self {
        self.n_paths = Some(n);
        self
    }

    pub fn noise(mut self, n: usize) -> Self {
        self.n_noise = Some(n);
        self
    }
}

/// The part of a report that is a pure function of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBody {
    pub experiment: String,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub rows: Vec<ResultRow>,
    pub notes: Vec<String>,
    pub artifacts: BTreeMap<String, serde_json::Value>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    #[serde(flatten)]
    pub body: ReportBody,
    /// Wall time of each row, in seconds, aligned with `body.rows`.
    pub row_wall_time_s: Vec<f64>,
    pub wall_time_s: f64,
    pub cache_events: Vec<CacheEvent>,
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.body.passed
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.body.checks.iter().filter(|c| !c.passed)
    }

    /// The report without wall times or cache activity.
    pub fn deterministic_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Io(format!("report: {e}")))
    }

    /// Creates `<root>/<hash>-<timestamp>` and writes report.json,
    /// checks.csv, results.csv, config.toml and one JSON file per artifact.
    /// Existing directories are never reused.
    pub fn write(&self, root: &Path, config_toml: &str) -> Result<PathBuf, HarnessError> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let base = format!("{}-{stamp}", &self.body.config_hash[..16]);
        let mut dir = root.join(&base);
        let mut k = 1;
        loop {
            match fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    dir = root.join(format!("{base}-{k}"));
                    k += 1;
                }
                Err(e) => return Err(io_err(&dir, e)),
            }
        }
        let write = |name: &str, text: &str| fs::write(dir.join(name), text).map_err(|e| io_err(&dir.join(name), e));
        write("report.json", &self.to_json())?;
        write("config.toml", config_toml)?;
        for (name, value) in &self.body.artifacts {
            write(&format!("{name}.json"), &serde_json::to_string_pretty(value).expect("artifact serializes"))?;
        }
        self.write_checks(&dir.join("checks.csv"))?;
        self.write_rows(&dir.join("results.csv"))?;
        Ok(dir)
    }

    fn write_checks(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
        let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(["name", "value", "reference", "tolerance", "rule", "deviation", "passed"]).map_err(csv_err)?;
        for c in &self.body.checks {
            let rule = serde_json::to_value(c.rule).expect("rule serializes");
            w.write_record([
                c.name.clone(),
                c.value.to_string(),
                c.reference.map(|r| r.to_string()).unwrap_or_default(),
                c.tolerance.to_string(),
                rule.as_str().unwrap_or_default().to_string(),
                c.deviation().to_string(),
                c.passed.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    fn write_rows(&self, path: &Path) -> Result<(), HarnessError> {
        let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::Io(e.to_string()))?;
        let csv_err = |e: csv::Error| HarnessError::Io(e.to_string());
        let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
        let opt_n = |x: Option<usize>| x.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            "experiment_id",
            "label",
            "epsilon",
            "theta",
            "estimate",
            "std_error",
            "n_paths",
            "n_noise",
            "seed",
            "wall_time_s",
        ])
        .map_err(csv_err)?;
        for (r, t) in self.body.rows.iter().zip(&self.row_wall_time_s) {
            w.write_record([
                r.experiment_id.clone(),
                r.label.clone(),
                opt(r.epsilon),
                opt(r.theta),
                r.estimate.to_string(),
                opt(r.std_error),
                opt_n(r.n_paths),
                opt_n(r.n_noise),
                r.seed.to_string(),
                format!("{t:.3}"),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }
}

fn io_err(path: &Path, e: std::io::Error) -> HarnessError {
    HarnessError::Io(format!("{}: {e}", path.display()))
}
