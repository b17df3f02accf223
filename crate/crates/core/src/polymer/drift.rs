//! Tabulated drift magnitudes |b_τ^ϑ(r)| for the Euler–Maruyama sampler, with
//! the magnitude frozen inside the core radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{DisorderParam, KernelRule};

/// Core radius in units of √δt.
pub const DEFAULT_CORE_FACTOR: f64 = 1.0;
const PROFILE_NODES: usize = 512;
/// The drift is below e^{-40} relative to its core value beyond √(80τ).
const TAIL_RADIUS2: f64 = 80.0;

/// ln(r·|b_τ(r)|) + r²/2τ on a logarithmic grid from the core radius
/// outward, interpolated linearly in ln r.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftProfile {
    pub tau: f64,
    pub theta: DisorderParam,
    pub core: f64,
    radii: Vec<f64>,
    ln_h: Vec<f64>,
}

impl DriftProfile {
    pub fn new(tau: f64, theta: DisorderParam, core: f64) -> Result<Self> {
        if !(core > 0.0) || !core.is_finite() {
            return Err(domain(format!("core radius must be positive, got {core}")));
        }
        let rule = KernelRule::new(tau, theta, 0.5 * core)?;
        let r_hi = (TAIL_RADIUS2 * tau).sqrt().max(core * 1.01);
        let (u0, u1) = (core.ln(), r_hi.ln());
        let du = (u1 - u0) / (PROFILE_NODES - 1) as f64;
        let radii: Vec<f64> = (0..PROFILE_NODES).map(|i| (u0 + i as f64 * du).exp()).collect();
        let mut ln_h = Vec::with_capacity(PROFILE_NODES);
        for &r in &radii {
            let b = rule.drift_magnitude(r);
            if !b.is_finite() {
                return Err(Error::Overflow(format!("drift at radius {r} for tau = {tau} is not finite")));
            }
            ln_h.push((r * b).max(1e-300).ln() + r * r / (2.0 * tau));
        }
        Ok(DriftProfile { tau, theta, core, radii, ln_h })
    }

    /// |b| at radius r; constant inside the core, zero beyond the table.
    pub fn magnitude(&self, r: f64) -> f64 {
        if r <= self.core {
            return self.at_node(0);
        }
        let n = self.radii.len();
        if r >= self.radii[n - 1] {
            return 0.0;
        }
        let u0 = self.radii[0].ln();
        let du = (self.radii[n - 1].ln() - u0) / (n - 1) as f64;
        let s = (r.ln() - u0) / du;
        let i = (s.floor() as usize).min(n - 2);
        let a = s - i as f64;
        ((1.0 - a) * self.ln_h[i] + a * self.ln_h[i + 1] - r * r / (2.0 * self.tau)).exp() / r
    }

    fn at_node(&self, i: usize) -> f64 {
        let r = self.radii[i];
        (self.ln_h[i] - r * r / (2.0 * self.tau)).exp() / r
    }

    /// The (radius, |b|) pairs queried from the kernels module.
    pub fn trace(&self) -> Vec<(f64, f64)> {
        (0..self.radii.len()).map(|i| (self.radii[i], self.at_node(i))).collect()
    }
}

/// One profile per Euler step: step k uses τ = T − k δt.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftTable {
    pub big_t: f64,
    pub theta: DisorderParam,
    pub dt: f64,
    pub core: f64,
    profiles: Vec<DriftProfile>,
}

impl DriftTable {
    /// Tables for the first `n_steps` steps, with core radius core_factor·√δt.
    pub fn new(big_t: f64, theta: DisorderParam, dt: f64, n_steps: usize, core_factor: f64) -> Result<Self> {
        if !(dt > 0.0) || !(big_t > 0.0) || !big_t.is_finite() {
            return Err(domain(format!("need T > 0 and dt > 0, got T = {big_t}, dt = {dt}")));
        }
        if n_steps == 0 || n_steps as f64 * dt > big_t * (1.0 + 1e-12) {
            return Err(domain(format!("{n_steps} steps of {dt} do not fit in [0, {big_t}]")));
        }
        if !(core_factor > 0.0) {
            return Err(domain(format!("core factor must be positive, got {core_factor}")));
        }
        let core = core_factor * dt.sqrt();
        let profiles = (0..n_steps)
            .into_par_iter()
            .map(|k| DriftProfile::new(big_t - k as f64 * dt, theta, core))
            .collect::<Result<Vec<_>>>()?;
        Ok(DriftTable { big_t, theta, dt, core, profiles })
    }

    pub fn n_steps(&self) -> usize {
        self.profiles.len()
    }

    pub fn profile(&self, k: usize) -> &DriftProfile {
        &self.profiles[k]
    }
}
