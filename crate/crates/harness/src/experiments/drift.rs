//! |b_T^ϑ(y)| |y| ln(1/|y|) near the origin.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::{drift_eval, DisorderParam};

use super::{non_decreasing_steps, Outcome};
use crate::config::{check, epsilon, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriftParams {
    /// Remaining time horizon (time).
    pub time: f64,
    pub theta: f64,
    /// Decreasing radii |y| (length) for the trend.
    pub radii: Vec<f64>,
    /// Radius (length) where the normalized drift must lie within `band` of 1.
    pub check_radius: f64,
    pub band: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        DriftParams { time: 1.0, theta: 0.0, radii: vec![1e-2, 1e-3, 1e-4, 1e-5], check_radius: 1e-4, band: 0.15 }
    }
}

impl Schema for DriftParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("time", "time"),
        ("theta", "dimensionless"),
        ("radii", "length"),
        ("check_radius", "length"),
        ("band", "dimensionless"),
    ];

    fn validate(&self) -> Result<(), String> {
        positive("time", self.time)?;
        finite("theta", self.theta)?;
        check(self.radii.len() >= 2, || "radii needs at least two values".into())?;
        for &r in &self.radii {
            epsilon("radii", r)?;
        }
        check(self.radii.windows(2).all(|w| w[1] < w[0]), || "radii must decrease".into())?;
        epsilon("check_radius", self.check_radius)?;
        positive("band", self.band)
    }
}

fn normalized(p: &DriftParams, r: f64) -> Result<f64, HarnessError> {
    let b = drift_eval(p.time, DisorderParam::new(p.theta), [r, 0.0])?.magnitude;
    Ok(b * r * (1.0 / r).ln())
}

pub fn run(p: &DriftParams, seed: u64) -> Result<Outcome, HarnessError> {
    let mut out = Outcome::default();
    let mut gaps = Vec::new();
    for &r in &p.radii {
        let start = Instant::now();
        let v = normalized(p, r)?;
        gaps.push((v - 1.0).abs());
        out.row(ResultRow::new("drift", &format!("|b| |y| ln(1/|y|) at |y| = {r:e}"), v, seed).theta(p.theta), start);
    }
    let v = normalized(p, p.check_radius)?;
    out.checks.push(Check::abs(&format!("normalized drift at |y| = {:e}", p.check_radius), v, 1.0, p.band));
    out.checks.push(Check::none_of("steps not moving toward 1", non_decreasing_steps(&gaps)));
    Ok(out)
}
