//! Feynman–Kac estimates by sampling Brownian paths through one noise
//! realization.
//!
//! The weight of a path p is exp{√V Σₖ ξₖ(p(rₖ)) δt − ½ V Σₖ δt² Var ξₖ(p(rₖ))}:
//! the compensator is the exact variance of the exponent given the path, so
//! the noise average of every weight is one.

use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::measure::GaussianTest;

use crate::rng::stream_rng;
use super::{CouplingSchedule, NoiseRealization};

const PATH_TAG: u64 = 0x7061_7468;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeynmanKacEstimate {
    /// Fixed start, or `None` when starts are drawn from the test function.
    pub start: Option<[f64; 2]>,
    pub interval: (f64, f64),
    pub test_id: String,
    pub n_paths: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl FeynmanKacEstimate {
    fn from_samples(start: Option<[f64; 2]>, interval: (f64, f64), test_id: &str, xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let variance = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        FeynmanKacEstimate {
            start,
            interval,
            test_id: test_id.to_string(),
            n_paths: xs.len(),
            mean,
            variance,
            std_error: (variance / n).sqrt(),
        }
    }
}

pub(crate) fn check_coupling(coupling: &CouplingSchedule, noise: &NoiseRealization) -> Result<()> {
    if !(coupling.v >= 0.0) || !coupling.v.is_finite() {
        return Err(Error::Coupling(format!("coupling must be nonnegative, got {}", coupling.v)));
    }
    if (coupling.epsilon - noise.epsilon()).abs() > 1e-12 * noise.epsilon() {
        return Err(Error::Coupling(format!(
            "coupling built for epsilon = {} but the noise has epsilon = {}",
            coupling.epsilon,
            noise.epsilon()
        )));
    }
    Ok(())
}

struct PathState {
    x: [f64; 2],
    exponent: f64,
    variance: f64,
    rng: rand_chacha::ChaCha8Rng,
}

/// Runs all paths in lockstep over the noise slices and returns the final
/// positions with their log-weights.
fn run_paths(
    starts: Vec<([f64; 2], rand_chacha::ChaCha8Rng)>,
    v: f64,
    noise: &NoiseRealization,
) -> Result<Vec<([f64; 2], f64)>> {
    let dt = noise.dt();
    let sd = dt.sqrt();
    let mut paths: Vec<PathState> =
        starts.into_iter().map(|(x, rng)| PathState { x, exponent: 0.0, variance: 0.0, rng }).collect();
    for k in 0..noise.n_slices() as i64 {
        let slice = noise.slice(noise.first_slice() + k)?;
        paths.par_iter_mut().try_for_each(|p| -> Result<()> {
            p.exponent += noise.value(&slice, p.x)? * dt;
            p.variance += noise.point_variance(p.x)? * dt * dt;
            let z0: f64 = StandardNormal.sample(&mut p.rng);
            let z1: f64 = StandardNormal.sample(&mut p.rng);
            p.x = [p.x[0] + sd * z0, p.x[1] + sd * z1];
            Ok(())
        })?;
    }
    let s = v.sqrt();
    Ok(paths.into_iter().map(|p| (p.x, s * p.exponent - 0.5 * v * p.variance)).collect())
}

/// Log-weight exponent and compensator of a single frozen path, for checks.
pub fn path_weight_terms(path: &[[f64; 2]], noise: &NoiseRealization) -> Result<(f64, f64)> {
    if path.len() != noise.n_slices() {
        return Err(Error::Shape(format!("{} path points for {} slices", path.len(), noise.n_slices())));
    }
    let dt = noise.dt();
    let (mut e, mut var) = (0.0, 0.0);
    for (k, x) in path.iter().enumerate() {
        let slice = noise.slice(noise.first_slice() + k as i64)?;
        e += noise.value(&slice, *x)? * dt;
        var += noise.point_variance(*x)? * dt * dt;
    }
    Ok((e, var))
}

/// Estimates ∫ Z(x, dy) φ(y) for a fixed start x.
pub fn feynman_kac<F: Fn([f64; 2]) -> f64 + Sync>(
    start: [f64; 2],
    coupling: &CouplingSchedule,
    test: F,
    test_id: &str,
    n_paths: usize,
    noise: &NoiseRealization,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    check_coupling(coupling, noise)?;
    if n_paths < 2 {
        return Err(domain("at least two paths are needed"));
    }
    let starts = (0..n_paths).map(|i| (start, stream_rng(seed, PATH_TAG, i as u64))).collect();
    let ends = run_paths(starts, coupling.v, noise)?;
    let xs: Vec<f64> = ends.par_iter().map(|&(y, lw)| lw.exp() * test(y)).collect();
    Ok(FeynmanKacEstimate::from_samples(Some(start), noise.interval(), test_id, &xs))
}

/// Estimates ⟨Z, φ⟩ for a single-term test φ(x, y) = f(x)h(y): starts are
/// drawn from f/∫f and each path contributes (∫f)·weight·h(end).
pub fn feynman_kac_pairing(
    test: &GaussianTest,
    coupling: &CouplingSchedule,
    n_paths: usize,
    noise: &NoiseRealization,
    seed: u64,
) -> Result<FeynmanKacEstimate> {
    check_coupling(coupling, noise)?;
    test.validate()?;
    if test.terms.len() != 1 {
        return Err(domain("path pairing supports single-term test functions only"));
    }
    if n_paths < 2 {
        return Err(domain("at least two paths are needed"));
    }
    let term = test.terms[0];
    let c = test.var;
    let sd = c.sqrt();
    let starts = (0..n_paths)
        .map(|i| {
            let mut rng = stream_rng(seed, PATH_TAG, i as u64);
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            ([term.mx[0] + sd * z0, term.mx[1] + sd * z1], rng)
        })
        .collect();
    let ends = run_paths(starts, coupling.v, noise)?;
    let mass = term.coef * 2.0 * PI * c;
    let xs: Vec<f64> = ends
        .par_iter()
        .map(|&(y, lw)| {
            let d2 = (y[0] - term.my[0]).powi(2) + (y[1] - term.my[1]).powi(2);
            mass * lw.exp() * (-d2 / (2.0 * c)).exp()
        })
        .collect();
    Ok(FeynmanKacEstimate::from_samples(None, noise.interval(), "gaussian-pairing", &xs))
}
