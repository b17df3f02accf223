//! Feynman–Kac mean of the mollified SHE pairing against ⟨U, φ⟩.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use shf_core::kernels::DisorderParam;
use shf_core::measure::{u_mean_pairing, GaussianTest};
use shf_core::she::{coupling, feynman_kac_pairing, realization_seed, sample_noise, LatticeSpec, MollifierSpec};

use super::Outcome;
use crate::config::{at_least, epsilon, finite, positive, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

const PATH_STREAM: u64 = 0x9a7b_5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SheMeanParams {
    /// Mollification scale ε (length).
    pub epsilon: f64,
    pub theta: f64,
    /// Horizon t (time).
    pub time: f64,
    /// Test variance (length²) and centers (length).
    pub test_var: f64,
    pub test_mx: [f64; 2],
    pub test_my: [f64; 2],
    pub n_noise: usize,
    pub n_paths: usize,
    /// Half width of the noise window (length).
    pub half_width: f64,
    /// Support radius of the bump mollifier (dimensionless).
    pub mollifier_radius: f64,
    /// Allowed distance in combined standard errors.
    pub z_tol: f64,
}

impl Default for SheMeanParams {
    fn default() -> Self {
        SheMeanParams {
            epsilon: 0.05,
            theta: 0.0,
            time: 0.01,
            test_var: 0.01,
            test_mx: [0.0, 0.0],
            test_my: [0.0, 0.0],
            n_noise: 200,
            n_paths: 2000,
            half_width: 1.1,
            mollifier_radius: 1.0,
            z_tol: 3.0,
        }
    }
}

impl Schema for SheMeanParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("epsilon", "length"),
        ("theta", "dimensionless"),
        ("time", "time"),
        ("test_var", "length^2"),
        ("test_mx", "length"),
        ("test_my", "length"),
        ("n_noise", "count"),
        ("n_paths", "count"),
        ("half_width", "length"),
        ("mollifier_radius", "dimensionless"),
        ("z_tol", "standard errors"),
    ];

    fn validate(&self) -> Result<(), String> {
        epsilon("epsilon", self.epsilon)?;
        finite("theta", self.theta)?;
        positive("time", self.time)?;
        positive("test_var", self.test_var)?;
        at_least("n_noise", self.n_noise, 2)?;
        at_least("n_paths", self.n_paths, 2)?;
        positive("half_width", self.half_width)?;
        positive("mollifier_radius", self.mollifier_radius)?;
        positive("z_tol", self.z_tol)
    }
}

pub fn run(p: &SheMeanParams, seed: u64) -> Result<Outcome, HarnessError> {
    let start = Instant::now();
    let m = MollifierSpec::bump(p.mollifier_radius)?;
    let c = coupling(DisorderParam::new(p.theta), p.epsilon, &m)?;
    let center = [(p.test_mx[0] + p.test_my[0]) / 2.0, (p.test_mx[1] + p.test_my[1]) / 2.0];
    let lattice = LatticeSpec::resolving(p.epsilon, center, p.half_width);
    let test = GaussianTest::single(p.test_var, p.test_mx, p.test_my);
    let truth = u_mean_pairing(p.time, &test)?;
    let mut means = Vec::with_capacity(p.n_noise);
    for i in 0..p.n_noise {
        let noise = sample_noise((0.0, p.time), p.epsilon, &m, lattice, realization_seed(seed, i))?;
        let est = feynman_kac_pairing(&test, &c, p.n_paths, &noise, realization_seed(seed ^ PATH_STREAM, i))?;
        means.push(est.mean);
    }
    let n = means.len() as f64;
    let mean = means.iter().sum::<f64>() / n;
    let var = means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let mut out = Outcome::default();
    out.row(
        ResultRow::new("she-mean", "mean pairing", mean, seed)
            .epsilon(p.epsilon)
            .theta(p.theta)
            .se(se)
            .paths(p.n_paths)
            .noise(p.n_noise),
        start,
    );
    out.row(ResultRow::new("she-mean", "<U, phi>", truth, seed), start);
    out.checks.push(Check::abs("mean pairing against <U, phi>", mean, truth, p.z_tol * se));
    out.notes.push(format!("z = {:.3}", (mean - truth) / se));
    Ok(out)
}
