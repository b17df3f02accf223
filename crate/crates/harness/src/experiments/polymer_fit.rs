//! Chi-square fit of the polymer SDE ensemble to the Doob transition density.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::polymer::{sample_paths, transition_check, DriftTable};

use super::Outcome;
use crate::config::{at_least, check, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolymerFitParams {
    /// Polymer horizon T (time).
    pub big_t: f64,
    pub theta: f64,
    /// Time (time) at which the radial law is tested.
    pub probe_time: f64,
    /// Start point (length).
    pub x0: [f64; 2],
    /// Euler step (time).
    pub dt: f64,
    pub n_paths: usize,
    /// Drift core radius in units of √dt.
    pub core_factor: f64,
    pub n_bins: usize,
    /// Innermost bins left out of the statistic.
    pub dropped_bins: usize,
    pub p_min: f64,
}

impl Default for PolymerFitParams {
    fn default() -> Self {
        PolymerFitParams {
            big_t: 1.0,
            theta: 0.0,
            probe_time: 0.5,
            x0: [1.0, 0.0],
            dt: 1e-3,
            n_paths: 100_000,
            core_factor: 1.0,
            n_bins: 16,
            dropped_bins: 1,
            p_min: 0.01,
        }
    }
}

impl PolymerFitParams {
    fn n_steps(&self) -> usize {
        (self.probe_time / self.dt).round() as usize
    }
}

impl Schema for PolymerFitParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("big_t", "time"),
        ("theta", "dimensionless"),
        ("probe_time", "time"),
        ("x0", "length"),
        ("dt", "time"),
        ("n_paths", "count"),
        ("core_factor", "multiples of sqrt(dt)"),
        ("n_bins", "count"),
        ("dropped_bins", "count"),
        ("p_min", "probability"),
    ];

    fn validate(&self) -> Result<(), String> {
        positive("big_t", self.big_t)?;
        finite("theta", self.theta)?;
        positive("probe_time", self.probe_time)?;
        check(self.probe_time < self.big_t, || "probe_time must be below big_t".into())?;
        check(self.x0 != [0.0, 0.0] && self.x0.iter().all(|v| v.is_finite()), || "x0 must be finite and off the origin".into())?;
        positive("dt", self.dt)?;
        let steps = self.probe_time / self.dt;
        check((steps - steps.round()).abs() < 1e-9 * steps, || "dt must divide probe_time".into())?;
        at_least("n_paths", self.n_paths, 2)?;
        positive("core_factor", self.core_factor)?;
        at_least("n_bins", self.n_bins, 3)?;
        check(self.dropped_bins + 2 <= self.n_bins, || "dropped_bins leaves fewer than two bins".into())?;
        check(self.p_min > 0.0 && self.p_min < 1.0, || "p_min must lie in (0, 1)".into())
    }
}

pub fn run(p: &PolymerFitParams, seed: u64) -> Result<Outcome, HarnessError> {
    let start = Instant::now();
    let n = p.n_steps();
    let table = DriftTable::new(p.big_t, DisorderParam::new(p.theta), p.dt, n, p.core_factor)?;
    let ens = sample_paths(&table, p.x0, p.n_paths, seed, n)?;
    let gof = transition_check(&ens, p.probe_time, p.n_bins, p.dropped_bins)?;
    let mut out = Outcome::default();
    out.row(ResultRow::new("polymer-fit", "chi-square statistic", gof.statistic, seed).theta(p.theta).paths(p.n_paths), start);
    out.row(ResultRow::new("polymer-fit", "p-value", gof.p_value, seed).theta(p.theta).paths(p.n_paths), start);
    out.checks.push(Check::above("chi-square p-value", gof.p_value, p.p_min));
    out.notes.push(format!("{} degrees of freedom, {} innermost bins dropped", gof.df, gof.dropped_bins));
    out.artifacts.insert("gof".into(), serde_json::to_value(&gof).expect("report serializes"));
    Ok(out)
}
