//! Second-moment Chapman–Kolmogorov defect for deterministic kernels.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::measure::{chapman_defect, GaussianTest};

use super::{non_decreasing_steps, Outcome};
use crate::config::{check, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChapmanParams {
    /// r < s < t < u (time) for the lhs/rhs comparison.
    pub times: [f64; 4],
    pub theta: f64,
    /// Gaussian test φ(x, y) = exp(−|x − mx|²/2v − |y − my|²/2v); v in length².
    pub test_var: f64,
    pub test_mx: [f64; 2],
    pub test_my: [f64; 2],
    pub rel_tol: f64,
    /// Ladder (r, s, s + gap, u) with these gaps (time), decreasing.
    pub ladder_times: [f64; 3],
    pub gaps: Vec<f64>,
}

impl Default for ChapmanParams {
    fn default() -> Self {
        ChapmanParams {
            times: [0.0, 0.3, 0.5, 1.0],
            theta: 0.0,
            test_var: 0.5,
            test_mx: [0.2, -0.1],
            test_my: [0.0, 0.3],
            rel_tol: 5e-2,
            ladder_times: [0.0, 0.5, 1.0],
            gaps: vec![0.2, 0.1, 0.05, 0.02],
        }
    }
}

impl Schema for ChapmanParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("times", "time"),
        ("theta", "dimensionless"),
        ("test_var", "length^2"),
        ("test_mx", "length"),
        ("test_my", "length"),
        ("rel_tol", "relative"),
        ("ladder_times", "time"),
        ("gaps", "time"),
    ];

    fn validate(&self) -> Result<(), String> {
        let t = self.times;
        check(t.iter().all(|x| x.is_finite()) && t[0] < t[1] && t[1] < t[2] && t[2] < t[3], || {
            format!("times must strictly increase, got {t:?}")
        })?;
        finite("theta", self.theta)?;
        positive("test_var", self.test_var)?;
        positive("rel_tol", self.rel_tol)?;
        let [r, s, u] = self.ladder_times;
        check(r < s && s < u, || "ladder_times must strictly increase".into())?;
        check(!self.gaps.is_empty() && self.gaps.iter().all(|&g| g > 0.0 && s + g < u), || {
            "gaps must be positive and fit between ladder_times[1] and ladder_times[2]".into()
        })?;
        check(self.gaps.windows(2).all(|w| w[1] < w[0]), || "gaps must decrease".into())
    }
}

pub fn run(p: &ChapmanParams, seed: u64) -> Result<Outcome, HarnessError> {
    let theta = DisorderParam::new(p.theta);
    let test = GaussianTest::single(p.test_var, p.test_mx, p.test_my);
    let mut out = Outcome::default();
    let start = Instant::now();
    let (t0, t1, t2, t3) = (p.times[0], p.times[1], p.times[2], p.times[3]);
    let (lhs, rhs) = chapman_defect((t0, t1, t2, t3), theta, &test)?;
    out.row(ResultRow::new("chapman", "lhs", lhs, seed).theta(p.theta), start);
    out.row(ResultRow::new("chapman", "rhs", rhs, seed).theta(p.theta), start);
    out.checks.push(Check::rel("lhs against rhs", lhs, rhs, p.rel_tol));
    let [r, s, u] = p.ladder_times;
    let mut ladder = Vec::new();
    for &g in &p.gaps {
        let start = Instant::now();
        let (_, rhs) = chapman_defect((r, s, s + g, u), theta, &test)?;
        ladder.push(rhs);
        out.row(ResultRow::new("chapman", &format!("rhs at gap {g}"), rhs, seed).theta(p.theta), start);
    }
    out.checks.push(Check::none_of("rhs steps not decreasing", non_decreasing_steps(&ladder)));
    out.checks.push(Check::none_of("rhs values not positive", ladder.iter().filter(|&&v| !(v > 0.0)).count()));
    Ok(out)
}
