//! Radon–Nikodym reweighting of Doob chains from ϑ to ϑ + Δϑ along an ε ladder.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::polymer::{rn_reweight_check, sample_v_chain, ESS_THRESHOLD};

use super::{non_decreasing_steps, Outcome};
use crate::config::{at_least, check, epsilon, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RnTrendParams {
    /// Polymer horizon T (time).
    pub big_t: f64,
    pub theta: f64,
    /// Δϑ, at most 1 in magnitude.
    pub theta_shift: f64,
    /// Start point (length).
    pub x0: [f64; 2],
    /// Chain step (time); must divide big_t.
    pub dt: f64,
    pub n_paths: usize,
    /// Decreasing ball radii ε (length).
    pub epsilons: Vec<f64>,
    pub ess_min: f64,
}

impl Default for RnTrendParams {
    fn default() -> Self {
        RnTrendParams {
            big_t: 1.0,
            theta: 0.0,
            theta_shift: 0.5,
            x0: [0.1, 0.0],
            dt: 2.5e-5,
            n_paths: 4000,
            epsilons: vec![0.05, 0.02, 0.01],
            ess_min: ESS_THRESHOLD,
        }
    }
}

impl Schema for RnTrendParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("big_t", "time"),
        ("theta", "dimensionless"),
        ("theta_shift", "dimensionless"),
        ("x0", "length"),
        ("dt", "time"),
        ("n_paths", "count"),
        ("epsilons", "length"),
        ("ess_min", "count"),
    ];

    fn validate(&self) -> Result<(), String> {
        positive("big_t", self.big_t)?;
        finite("theta", self.theta)?;
        check(self.theta_shift.abs() <= 1.0, || "theta_shift must lie in [-1, 1]".into())?;
        check(self.x0 != [0.0, 0.0] && self.x0.iter().all(|v| v.is_finite()), || "x0 must be finite and off the origin".into())?;
        positive("dt", self.dt)?;
        let steps = self.big_t / self.dt;
        check((steps - steps.round()).abs() < 1e-9 * steps, || "dt must divide big_t".into())?;
        at_least("n_paths", self.n_paths, 2)?;
        check(self.epsilons.len() >= 2, || "epsilons needs at least two values".into())?;
        for &e in &self.epsilons {
            epsilon("epsilons", e)?;
        }
        check(self.epsilons.windows(2).all(|w| w[1] < w[0]), || "epsilons must decrease".into())?;
        positive("ess_min", self.ess_min)
    }
}

pub fn run(p: &RnTrendParams, seed: u64) -> Result<Outcome, HarnessError> {
    let start = Instant::now();
    let ens = sample_v_chain(p.big_t, DisorderParam::new(p.theta), p.x0, p.dt, p.n_paths, &p.epsilons, seed)?;
    let mut out = Outcome::default();
    let target = p.theta + p.theta_shift;
    let mut gaps = Vec::new();
    let mut min_ess = f64::INFINITY;
    for &eps in &p.epsilons {
        let r = rn_reweight_check(&ens, target, eps)?;
        gaps.push((r.ratio - 1.0).abs());
        min_ess = min_ess.min(r.ess);
        out.row(
            ResultRow::new("rn-trend", "lhs/rhs", r.ratio, seed).epsilon(eps).theta(target).se(r.ratio_se).paths(p.n_paths),
            start,
        );
        out.row(ResultRow::new("rn-trend", "effective sample size", r.ess, seed).epsilon(eps).theta(target), start);
    }
    out.checks.push(Check::none_of("ladder steps where |lhs/rhs - 1| does not decrease", non_decreasing_steps(&gaps)));
    out.checks.push(Check::at_least("smallest effective sample size", min_ess, p.ess_min));
    out.notes.push("exact agreement lhs = rhs is not asserted: the local time is only an L1 limit".into());
    Ok(out)
}
