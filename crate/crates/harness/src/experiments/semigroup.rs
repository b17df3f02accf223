//! P_{s+t}(x, z) against ∫ P_s(x, y) P_t(y, z) dy on random probes, using
//! cached kernel tables.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use shf_core::kernels::{semigroup_pair, DisorderParam, GridSpec, RadialNodes};

use super::{max_or_nan, Outcome};
use crate::cache::KernelCache;
use crate::config::{at_least, check, positive, range, Schema};
use crate::report::{Check, ResultRow};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SemigroupParams {
    pub n_probes: usize,
    /// Range of s and t (time).
    pub time_range: [f64; 2],
    /// Range of |x| and |z| (length).
    pub radius_range: [f64; 2],
    /// Each probe draws ϑ from this list.
    pub thetas: Vec<f64>,
    pub rel_tol: f64,
    /// Kernel table radii (length) and point count.
    pub grid_r_min: f64,
    pub grid_r_max: f64,
    pub grid_points: usize,
}

impl Default for SemigroupParams {
    fn default() -> Self {
        SemigroupParams {
            n_probes: 50,
            time_range: [0.1, 1.0],
            radius_range: [0.1, 2.0],
            thetas: vec![-1.0, 0.0, 1.0],
            rel_tol: 1e-3,
            grid_r_min: 1e-4,
            grid_r_max: 16.0,
            grid_points: 121,
        }
    }
}

impl Schema for SemigroupParams {
    const UNITS: &'static [(&'static str, &'static str)] = &[
        ("time_range", "time"),
        ("radius_range", "length"),
        ("thetas", "dimensionless"),
        ("rel_tol", "relative"),
        ("grid_r_min", "length"),
        ("grid_r_max", "length"),
        ("grid_points", "count"),
        ("n_probes", "count"),
    ];

    fn validate(&self) -> Result<(), String> {
        at_least("n_probes", self.n_probes, 1)?;
        range("time_range", self.time_range[0], self.time_range[1])?;
        positive("time_range[0]", self.time_range[0])?;
        range("radius_range", self.radius_range[0], self.radius_range[1])?;
        positive("radius_range[0]", self.radius_range[0])?;
        check(!self.thetas.is_empty() && self.thetas.iter().all(|t| t.is_finite()), || {
            "thetas must be a nonempty list of finite values".into()
        })?;
        positive("rel_tol", self.rel_tol)?;
        GridSpec::new(self.grid_r_min, self.grid_r_max, self.grid_points).map_err(|e| e.to_string())?;
        let need = self.radius_range[1] + 12.0 * self.time_range[1].sqrt() + 1.0;
        check(self.grid_r_max >= need, || format!("grid_r_max must be at least {need} to cover the quadrature nodes"))
    }
}

pub fn run(p: &SemigroupParams, seed: u64, cache: &KernelCache) -> Result<Outcome, HarnessError> {
    let spec = GridSpec::new(p.grid_r_min, p.grid_r_max, p.grid_points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Outcome::default();
    let mut defects = Vec::with_capacity(p.n_probes);
    let point = |rng: &mut ChaCha8Rng| {
        let r = rng.random_range(p.radius_range[0]..=p.radius_range[1]);
        let a = rng.random_range(0.0..2.0 * PI);
        [r * a.cos(), r * a.sin()]
    };
    for i in 0..p.n_probes {
        let start = Instant::now();
        let s = rng.random_range(p.time_range[0]..=p.time_range[1]);
        let t = rng.random_range(p.time_range[0]..=p.time_range[1]);
        let theta = p.thetas[rng.random_range(0..p.thetas.len())];
        let (x, z) = (point(&mut rng), point(&mut rng));
        let th = DisorderParam::new(theta);
        let (ks, kt, kst) = (cache.get(s, th, &spec)?, cache.get(t, th, &spec)?, cache.get(s + t, th, &spec)?);
        let nodes = RadialNodes::covering(p.radius_range[1], s.max(t));
        let (conv, direct) = semigroup_pair(&*ks, &*kt, &*kst, x, z, &nodes);
        let defect = (conv / direct - 1.0).abs();
        defects.push(defect);
        out.row(ResultRow::new("semigroup", &format!("probe {i} relative defect"), defect, seed).theta(theta), start);
    }
    out.checks.push(Check::at_most("max relative semigroup defect", max_or_nan(&defects), p.rel_tol));
    Ok(out)
}
