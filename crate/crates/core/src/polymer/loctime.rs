//! Occupation times of small balls around the origin, normalized into L^ε.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

use super::PathEnsemble;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalTimeEstimate {
    pub epsilon: f64,
    pub values: Vec<f64>,
}

impl LocalTimeEstimate {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Time in [a, a+dt] with |p| ≤ radius when |p| moves linearly from `ra` to `rb`.
pub(crate) fn segment_occupation(ra: f64, rb: f64, radius: f64, dt: f64) -> f64 {
    let (lo, hi) = if ra <= rb { (ra, rb) } else { (rb, ra) };
    if hi <= radius {
        dt
    } else if lo > radius {
        0.0
    } else {
        dt * (radius - lo) / (hi - lo)
    }
}

/// meas{a : |p(a)| ≤ radius} for a path sampled every `dt`.
pub fn occupation_time(path: &[[f64; 2]], dt: f64, radius: f64) -> f64 {
    let r = |x: &[f64; 2]| (x[0] * x[0] + x[1] * x[1]).sqrt();
    path.windows(2).map(|w| segment_occupation(r(&w[0]), r(&w[1]), radius, dt)).sum()
}

pub(crate) fn normalization(eps: f64) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("need 0 < epsilon < 1, got {eps}")));
    }
    let l = (1.0 / eps).ln();
    Ok(1.0 / (2.0 * eps * eps * l * l))
}

/// L^ε(p) = meas{a : |p(a)| ≤ ε} / (2ε² ln²(1/ε)).
pub fn local_time(path: &[[f64; 2]], dt: f64, eps: f64) -> Result<f64> {
    let c = normalization(eps)?;
    if !(dt > 0.0) {
        return Err(domain(format!("time step must be positive, got {dt}")));
    }
    Ok(c * occupation_time(path, dt, eps))
}

/// I^ε(p, q) = L^ε((p − q)/√2).
pub fn intersection_time(p: &[[f64; 2]], q: &[[f64; 2]], dt: f64, eps: f64) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("paths of lengths {} and {}", p.len(), q.len())));
    }
    let d: Vec<[f64; 2]> =
        p.iter().zip(q).map(|(a, b)| [(a[0] - b[0]) * FRAC_1_SQRT_2, (a[1] - b[1]) * FRAC_1_SQRT_2]).collect();
    local_time(&d, dt, eps)
}

/// L^ε for every path of an ensemble, on its recorded grid.
pub fn local_times(ensemble: &PathEnsemble, eps: f64) -> Result<LocalTimeEstimate> {
    if ensemble.times.len() < 2 {
        return Err(domain("the ensemble records fewer than two times"));
    }
    let dt = ensemble.times[1] - ensemble.times[0];
    let values = ensemble.paths.iter().map(|p| local_time(p, dt, eps)).collect::<Result<_>>()?;
    Ok(LocalTimeEstimate { epsilon: eps, values })
}
