//! Chi-square comparison of the radial law of X_t with the Doob density.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{domain, Error, Result};
use crate::kernels::{ring_gauss, DisorderParam, KernelRule};

use super::PathEnsemble;

const REF_NODES: usize = 20_001;

/// The law of |X_t| for X₀ = x₀ under the Doob transform, as a CDF on a fine
/// uniform grid:
/// q(ρ) = m(T−t, ρ)/m(T, |x₀|) · ρ · [∮ g_t(x₀ − ρe^{iφ}) dφ + 2π K_t(|x₀|, ρ)].
#[derive(Debug, Clone)]
pub struct RadialReference {
    pub big_t: f64,
    pub theta: DisorderParam,
    pub t: f64,
    pub r0: f64,
    /// ∫q before normalization; one up to quadrature error.
    pub mass: f64,
    rho: Vec<f64>,
    cdf: Vec<f64>,
}

impl RadialReference {
    pub fn new(big_t: f64, theta: DisorderParam, t: f64, r0: f64) -> Result<Self> {
        if !(t > 0.0 && t <= big_t) {
            return Err(Error::Ordering(format!("need 0 < t <= T, got t = {t}, T = {big_t}")));
        }
        if !(r0 > 0.0) {
            return Err(Error::Singularity("reference start at the origin".into()));
        }
        let step = KernelRule::new(t, theta, 1e-6)?;
        let end = if big_t - t > 0.0 { Some(KernelRule::new(big_t - t, theta, 1e-6)?) } else { None };
        let m0 = 1.0 + KernelRule::new(big_t, theta, r0.min(1e-6))?.mass_excess(r0);
        let top = r0 + 14.0 * t.sqrt();
        let h = top / (REF_NODES - 1) as f64;
        let rho: Vec<f64> = (0..REF_NODES).map(|i| i as f64 * h).collect();
        let q: Vec<f64> = rho
            .par_iter()
            .map(|&r| {
                if r == 0.0 {
                    return 0.0;
                }
                let m = end.as_ref().map_or(1.0, |e| 1.0 + e.mass_excess(r));
                m / m0 * r * (ring_gauss(t, r0, r) + 2.0 * PI * step.k(r0, r))
            })
            .collect();
        let mut cdf = vec![0.0; REF_NODES];
        for i in 1..REF_NODES {
            cdf[i] = cdf[i - 1] + 0.5 * h * (q[i - 1] + q[i]);
        }
        let mass = cdf[REF_NODES - 1];
        for c in &mut cdf {
            *c /= mass;
        }
        Ok(RadialReference { big_t, theta, t, r0, mass, rho, cdf })
    }

    pub fn cdf_at(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let h = self.rho[1];
        let s = r / h;
        if s >= (self.rho.len() - 1) as f64 {
            return 1.0;
        }
        let i = s.floor() as usize;
        let a = s - i as f64;
        (1.0 - a) * self.cdf[i] + a * self.cdf[i + 1]
    }

    pub fn quantile(&self, p: f64) -> f64 {
        let i = self.cdf.partition_point(|&c| c < p).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[i - 1], self.cdf[i]);
        let a = if c1 > c0 { (p - c0) / (c1 - c0) } else { 0.0 };
        self.rho[i - 1] + a * (self.rho[i] - self.rho[i - 1])
    }

    /// Chi-square test of `radii` on `n_bins` equiprobable bins, dropping the
    /// innermost `n_drop` bins and renormalizing over the rest.
    pub fn gof(&self, radii: &[f64], n_bins: usize, n_drop: usize) -> Result<GofReport> {
        if radii.is_empty() {
            return Err(domain("empty ensemble"));
        }
        if n_bins < n_drop + 2 {
            return Err(domain(format!("{n_bins} bins leave nothing after dropping {n_drop}")));
        }
        let edges: Vec<f64> = (1..n_bins).map(|j| self.quantile(j as f64 / n_bins as f64)).collect();
        let mut counts = vec![0usize; n_bins];
        for &r in radii {
            counts[edges.partition_point(|&e| e < r)] += 1;
        }
        let observed: Vec<usize> = counts[n_drop..].to_vec();
        let kept: usize = observed.iter().sum();
        let e = kept as f64 / observed.len() as f64;
        let statistic = observed.iter().map(|&o| (o as f64 - e).powi(2) / e).sum::<f64>();
        let df = observed.len() - 1;
        let p_value = ChiSquared::new(df as f64).map_err(|e| domain(e.to_string()))?.sf(statistic);
        Ok(GofReport {
            probe_time: self.t,
            big_t: self.big_t,
            theta: self.theta.theta,
            n_paths: radii.len(),
            n_bins,
            dropped_bins: n_drop,
            edges,
            observed,
            expected: e,
            statistic,
            df,
            p_value,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub probe_time: f64,
    pub big_t: f64,
    pub theta: f64,
    pub n_paths: usize,
    pub n_bins: usize,
    pub dropped_bins: usize,
    /// Inner bin edges, n_bins − 1 of them.
    pub edges: Vec<f64>,
    /// Counts in the kept bins.
    pub observed: Vec<usize>,
    /// Expected count per kept bin.
    pub expected: f64,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl GofReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }
}

/// Radial histogram of the ensemble at time t against the Doob density.
pub fn transition_check(ensemble: &PathEnsemble, t: f64, n_bins: usize, n_drop: usize) -> Result<GofReport> {
    if ensemble.paths.is_empty() {
        return Err(domain("empty ensemble"));
    }
    let pts = ensemble.at_time(t)?;
    let r0 = (ensemble.x0[0].powi(2) + ensemble.x0[1].powi(2)).sqrt();
    let reference = RadialReference::new(ensemble.big_t, ensemble.theta, t, r0)?;
    let radii: Vec<f64> = pts.iter().map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt()).collect();
    reference.gof(&radii, n_bins, n_drop)
}

/// Two-sample chi-square on `n_bins` bins at the pooled quantiles; returns
/// (statistic, df, p-value).
pub fn two_sample_chi_square(a: &[f64], b: &[f64], n_bins: usize) -> Result<(f64, usize, f64)> {
    if a.is_empty() || b.is_empty() || n_bins < 2 {
        return Err(domain("two nonempty samples and at least two bins are needed"));
    }
    let mut pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    pooled.sort_by(f64::total_cmp);
    let edges: Vec<f64> = (1..n_bins).map(|j| pooled[j * pooled.len() / n_bins]).collect();
    let hist = |xs: &[f64]| {
        let mut c = vec![0.0; n_bins];
        for &x in xs {
            c[edges.partition_point(|&e| e < x)] += 1.0;
        }
        c
    };
    let (ha, hb) = (hist(a), hist(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ka, kb) = ((nb / na).sqrt(), (na / nb).sqrt());
    let mut stat = 0.0;
    let mut df = n_bins - 1;
    for (x, y) in ha.iter().zip(&hb) {
        if x + y == 0.0 {
            df -= 1;
            continue;
        }
        stat += (ka * x - kb * y).powi(2) / (x + y);
    }
    let p = ChiSquared::new(df.max(1) as f64).map_err(|e| domain(e.to_string()))?.sf(stat);
    Ok((stat, df, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::doob_normalization;

    #[test]
    fn reference_is_normalized() {
        let th = DisorderParam::new(0.0);
        let r = RadialReference::new(1.0, th, 0.5, 1.0).unwrap();
        let want = doob_normalization(1.0, th, 0.0, 0.5, [1.0, 0.0]).unwrap();
        assert!((r.mass - want).abs() < 1e-5, "{} {want}", r.mass);
        assert!((r.mass - 1.0).abs() < 1e-4);
        for p in [0.01, 0.3, 0.5, 0.99] {
            assert!((r.cdf_at(r.quantile(p)) - p).abs() < 1e-9);
        }
    }

    #[test]
    fn gaussian_limit_is_rice() {
        // ϑ → −∞: |X_t| is Rice distributed; P(|X_t| ≤ ρ) for x₀ = 0 limit
        // checked against 1 − e^{−ρ²/2t} at a tiny start
        let r = RadialReference::new(1.0, DisorderParam::new(-1e8), 0.3, 1e-9).unwrap();
        for rho in [0.2, 0.5, 1.0] {
            let want = 1.0 - (-rho * rho / 0.6f64).exp();
            assert!((r.cdf_at(rho) - want).abs() < 1e-6);
        }
    }

    #[test]
    fn gof_on_exact_quantiles() {
        let r = RadialReference::new(1.0, DisorderParam::new(0.0), 0.5, 1.0).unwrap();
        let radii: Vec<f64> = (0..16_000).map(|i| r.quantile((i as f64 + 0.5) / 16_000.0)).collect();
        let g = r.gof(&radii, 16, 1).unwrap();
        assert_eq!(g.df, 14);
        assert_eq!(g.observed.iter().sum::<usize>(), 15_000);
        assert!(g.statistic < 1e-6 && g.p_value > 0.999);
        assert!(r.gof(&[], 16, 1).is_err());
        assert!(g.to_json().unwrap().contains("\"p_value\""));
    }

    #[test]
    fn two_sample_detects_shift() {
        let a: Vec<f64> = (0..4000).map(|i| (i as f64 + 0.5) / 4000.0).collect();
        let b: Vec<f64> = a.iter().map(|x| x * 0.9).collect();
        assert!(two_sample_chi_square(&a, &a, 10).unwrap().2 > 0.99);
        assert!(two_sample_chi_square(&a, &b, 10).unwrap().2 < 1e-6);
    }
}
