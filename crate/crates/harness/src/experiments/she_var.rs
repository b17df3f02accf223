//! Variance of the mollified SHE pairing along an ε ladder, and its ordering
//! in ϑ.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::measure::{k_pairing, GaussianTest};
use shf_core::she::{coupling, estimate_variance_pairing, LatticeSpec, MollifierSpec, VariancePairing};

use super::{non_decreasing_steps, Outcome};
use crate::config::{at_least, check, epsilon, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SheVarTrendParams {
    /// Decreasing mollification scales ε (length).
    pub epsilons: Vec<f64>,
    pub theta: f64,
    /// Horizon t (time).
    pub time: f64,
    /// Test variance (length²); the test is centered at the origin.
    pub test_var: f64,
    pub n_noise: usize,
    /// Half width of the noise window (length).
    pub half_width: f64,
    pub mollifier_radius: f64,
    /// ε (length) and the pair ϑ_low < ϑ_high for the ordering check.
    pub order_epsilon: f64,
    pub order_thetas: [f64; 2],
    pub order_n_noise: usize,
    /// Required separation in combined standard errors.
    pub z_order: f64,
}

impl Default for SheVarTrendParams {
    fn default() -> Self {
        SheVarTrendParams {
            epsilons: vec![0.1, 0.05, 0.025],
            theta: 0.0,
            time: 0.0025,
            test_var: 0.001,
            n_noise: 4000,
            half_width: 0.3,
            mollifier_radius: 1.0,
            order_epsilon: 0.05,
            order_thetas: [-1.0, 1.0],
            order_n_noise: 8000,
            z_order: 3.0,
        }
    }
}

impl Schema for SheVarTrendParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("epsilons", "length"),
        ("theta", "dimensionless"),
        ("time", "time"),
        ("test_var", "length^2"),
        ("n_noise", "count"),
        ("half_width", "length"),
        ("mollifier_radius", "dimensionless"),
        ("order_epsilon", "length"),
        ("order_thetas", "dimensionless"),
        ("order_n_noise", "count"),
        ("z_order", "standard errors"),
    ];

    fn validate(&self) -> Result<(), String> {
        check(self.epsilons.len() >= 2, || "epsilons needs at least two values".into())?;
        for &e in &self.epsilons {
            epsilon("epsilons", e)?;
        }
        check(self.epsilons.windows(2).all(|w| w[1] < w[0]), || "epsilons must decrease".into())?;
        finite("theta", self.theta)?;
        positive("time", self.time)?;
        positive("test_var", self.test_var)?;
        at_least("n_noise", self.n_noise, 2)?;
        positive("half_width", self.half_width)?;
        positive("mollifier_radius", self.mollifier_radius)?;
        epsilon("order_epsilon", self.order_epsilon)?;
        let [lo, hi] = self.order_thetas;
        check(lo.is_finite() && hi.is_finite() && lo < hi, || "order_thetas must be finite with low < high".into())?;
        at_least("order_n_noise", self.order_n_noise, 2)?;
        positive("z_order", self.z_order)
    }
}

pub fn run(p: &SheVarTrendParams, seed: u64) -> Result<Outcome, HarnessError> {
    let m = MollifierSpec::bump(p.mollifier_radius)?;
    let test = GaussianTest::single(p.test_var, [0.0, 0.0], [0.0, 0.0]);
    let estimate = |eps: f64, theta: f64, n: usize| -> Result<VariancePairing, HarnessError> {
        let c = coupling(DisorderParam::new(theta), eps, &m)?;
        let lattice = LatticeSpec::resolving(eps, [0.0, 0.0], p.half_width);
        Ok(estimate_variance_pairing((0.0, p.time), &c, &m, &test, n, lattice, seed)?)
    };
    let mut out = Outcome::default();
    let start = Instant::now();
    let target = k_pairing(p.time, DisorderParam::new(p.theta), &test)?;
    out.row(ResultRow::new("she-var-trend", "<K, phi x phi>", target, seed).theta(p.theta), start);
    let mut gaps = Vec::new();
    for &eps in &p.epsilons {
        let start = Instant::now();
        let v = estimate(eps, p.theta, p.n_noise)?;
        gaps.push((v.var - target).abs());
        out.row(
            ResultRow::new("she-var-trend", "variance pairing", v.var, seed)
                .epsilon(eps)
                .theta(p.theta)
                .se(v.var_se)
                .noise(p.n_noise),
            start,
        );
    }
    out.checks.push(Check::none_of("ladder steps not moving toward <K, phi x phi>", non_decreasing_steps(&gaps)));
    let mut ends = Vec::new();
    for theta in p.order_thetas {
        let start = Instant::now();
        let v = estimate(p.order_epsilon, theta, p.order_n_noise)?;
        out.row(
            ResultRow::new("she-var-trend", "variance pairing (ordering)", v.var, seed)
                .epsilon(p.order_epsilon)
                .theta(theta)
                .se(v.var_se)
                .noise(p.order_n_noise),
            start,
        );
        ends.push(v);
    }
    let z = (ends[1].var - ends[0].var) / (ends[0].var_se.powi(2) + ends[1].var_se.powi(2)).sqrt();
    out.checks.push(Check::above("variance gap between high and low theta, in standard errors", z, p.z_order));
    out.notes.push(
        "absolute agreement with <K, phi x phi> is not asserted: the approach in epsilon is logarithmic".into(),
    );
    Ok(out)
}
