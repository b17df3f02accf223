//! λ K_{λt}^ϑ(√λ x, √λ y) against K_t^{ϑ+ln λ}(x, y) on random probes.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shf_core::kernels::{k_kernel, DisorderParam};

use super::{max_or_nan, Outcome};
use crate::config::{at_least, check, positive, range, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScalingParams {
    pub n_probes: usize,
    /// Dimensionless rescaling factors λ.
    pub lambdas: Vec<f64>,
    /// Range of t (time).
    pub time_range: [f64; 2],
    pub theta_range: [f64; 2],
    /// Range of |x| and |y| (length).
    pub radius_range: [f64; 2],
    pub rel_tol: f64,
}

impl Default for ScalingParams {
    fn default() -> Self {
        ScalingParams {
            n_probes: 20,
            lambdas: vec![0.25, 4.0],
            time_range: [0.1, 1.0],
            theta_range: [-1.0, 1.0],
            radius_range: [0.1, 2.0],
            rel_tol: 1e-6,
        }
    }
}

impl Schema for ScalingParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("n_probes", "count"),
        ("lambdas", "dimensionless"),
        ("time_range", "time"),
        ("theta_range", "dimensionless"),
        ("radius_range", "length"),
        ("rel_tol", "relative"),
    ];

    fn validate(&self) -> Result<(), String> {
        at_least("n_probes", self.n_probes, 1)?;
        check(!self.lambdas.is_empty() && self.lambdas.iter().all(|l| *l > 0.0 && l.is_finite()), || {
            "lambdas must be a nonempty list of positive values".into()
        })?;
        range("time_range", self.time_range[0], self.time_range[1])?;
        positive("time_range[0]", self.time_range[0])?;
        range("theta_range", self.theta_range[0], self.theta_range[1])?;
        range("radius_range", self.radius_range[0], self.radius_range[1])?;
        positive("radius_range[0]", self.radius_range[0])?;
        positive("rel_tol", self.rel_tol)
    }
}

pub fn run(p: &ScalingParams, seed: u64) -> Result<Outcome, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let mut errs = Vec::new();
    let point = |rng: &mut ChaCha8Rng| {
        let r = rng.random_range(p.radius_range[0]..=p.radius_range[1]);
        let a = rng.random_range(0.0..2.0 * PI);
        [r * a.cos(), r * a.sin()]
    };
    for i in 0..p.n_probes {
        let t = rng.random_range(p.time_range[0]..=p.time_range[1]);
        let theta = rng.random_range(p.theta_range[0]..=p.theta_range[1]);
        let (x, y) = (point(&mut rng), point(&mut rng));
        for &l in &p.lambdas {
            let start = Instant::now();
            let s = l.sqrt();
            let lhs = l * k_kernel(l * t, DisorderParam::new(theta), [s * x[0], s * x[1]], [s * y[0], s * y[1]])?;
            let rhs = k_kernel(t, DisorderParam::new(theta + l.ln()), x, y)?;
            let e = (lhs / rhs - 1.0).abs();
            errs.push(e);
            out.row(ResultRow::new("scaling", &format!("probe {i} lambda {l} relative error"), e, seed).theta(theta), start);
        }
    }
    out.checks.push(Check::at_most("max relative scaling error", max_or_nan(&errs), p.rel_tol));
    Ok(out)
}
