//! Monte Carlo Chapman–Kolmogorov check on the mollified SHE lattice.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::measure::GaussianTest;
use shf_core::she::{chapman_mc, coupling, LatticeSpec, MollifierSpec};

use super::Outcome;
use crate::config::{at_least, check, epsilon, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChapmanMcParams {
    /// r ≤ s < t ≤ u (time).
    pub times: [f64; 4],
    /// Mollification scale ε (length).
    pub epsilon: f64,
    pub theta: f64,
    /// Test variance (length²); the test is centered at the origin.
    pub test_var: f64,
    pub n_noise: usize,
    /// Half width of the noise window (length).
    pub half_width: f64,
    pub mollifier_radius: f64,
    /// Allowed distance in standard errors of the paired difference.
    pub z_tol: f64,
}

impl Default for ChapmanMcParams {
    fn default() -> Self {
        ChapmanMcParams {
            times: [0.0, 0.01, 0.02, 0.03],
            epsilon: 0.1,
            theta: 0.0,
            test_var: 0.01,
            n_noise: 200,
            half_width: 0.8,
            mollifier_radius: 1.0,
            z_tol: 3.0,
        }
    }
}

impl Schema for ChapmanMcParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("times", "time"),
        ("epsilon", "length"),
        ("theta", "dimensionless"),
        ("test_var", "length^2"),
        ("n_noise", "count"),
        ("half_width", "length"),
        ("mollifier_radius", "dimensionless"),
        ("z_tol", "standard errors"),
    ];

    fn validate(&self) -> Result<(), String> {
        let [r, s, t, u] = self.times;
        check(r <= s && s < t && t <= u && r < u && r.is_finite() && u.is_finite(), || {
            format!("need r <= s < t <= u, got {:?}", self.times)
        })?;
        epsilon("epsilon", self.epsilon)?;
        finite("theta", self.theta)?;
        positive("test_var", self.test_var)?;
        at_least("n_noise", self.n_noise, 2)?;
        positive("half_width", self.half_width)?;
        positive("mollifier_radius", self.mollifier_radius)?;
        positive("z_tol", self.z_tol)
    }
}

pub fn run(p: &ChapmanMcParams, seed: u64) -> Result<Outcome, HarnessError> {
    let start = Instant::now();
    let m = MollifierSpec::bump(p.mollifier_radius)?;
    let c = coupling(DisorderParam::new(p.theta), p.epsilon, &m)?;
    let lattice = LatticeSpec::resolving(p.epsilon, [0.0, 0.0], p.half_width);
    let test = GaussianTest::single(p.test_var, [0.0, 0.0], [0.0, 0.0]);
    let [r, s, t, u] = p.times;
    let res = chapman_mc((r, s, t, u), &c, &m, &test, p.n_noise, lattice, seed)?;
    let mut out = Outcome::default();
    let row = |label: &str, v: f64, se: f64| {
        ResultRow::new("chapman-mc", label, v, seed).epsilon(p.epsilon).theta(p.theta).se(se).noise(p.n_noise)
    };
    out.row(row("lhs", res.lhs, res.lhs_se), start);
    out.row(row("rhs", res.rhs, res.rhs_se), start);
    out.checks.push(Check::abs("glued mean against direct mean", res.rhs, res.lhs, p.z_tol * res.diff_se));
    Ok(out)
}
