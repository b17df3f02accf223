//! Radial quadrature for integrals over y ∈ R² of products of kernels.

use std::f64::consts::PI;

use super::{check_doob_times, dist2, mass_or_one, norm, DisorderParam, KernelRule, RadialKernel};
use crate::error::Result;
use crate::quad::push_nodes;
use crate::specfun::{bessel_i0_scaled, g2};

/// Nodes and weights for ∫₀^{r_max} f(ρ) dρ: per-decade log panels below 1 and
/// linear panels above.
#[derive(Debug, Clone)]
pub struct RadialNodes {
    pub rho: Vec<f64>,
    pub weight: Vec<f64>,
}

impl RadialNodes {
    pub fn new(r_max: f64, panel_width: f64) -> Self {
        let (mut rho, mut weight) = (Vec::new(), Vec::new());
        let (mut us, mut uw) = (Vec::new(), Vec::new());
        let top = r_max.min(1.0);
        let mut lo = 1e-10f64.ln();
        let hi = top.ln();
        let step = 10f64.ln();
        while lo < hi {
            push_nodes(lo, (lo + step).min(hi), 16, &mut us, &mut uw);
            lo += step;
        }
        for (u, w) in us.into_iter().zip(uw) {
            let r = u.exp();
            rho.push(r);
            weight.push(w * r);
        }
        let mut lo = top;
        while lo < r_max {
            let hi = (lo + panel_width).min(r_max);
            push_nodes(lo, hi, 16, &mut rho, &mut weight);
            lo = hi;
        }
        RadialNodes { rho, weight }
    }

    /// Nodes wide enough for Gaussians of time `t` around radii up to `r`.
    pub fn covering(r: f64, t: f64) -> Self {
        let sd = t.sqrt();
        RadialNodes::new(r + 12.0 * sd + 1.0, (0.25 * sd).min(0.25))
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// ∫_{R²} f(|y|) dy.
pub fn radial_integral<F: Fn(f64) -> f64>(f: F, nodes: &RadialNodes) -> f64 {
    let mut s = 0.0;
    for (&r, &w) in nodes.rho.iter().zip(&nodes.weight) {
        s += w * r * f(r);
    }
    2.0 * PI * s
}

/// ∫₀^{2π} g_t(x − ρe^{iφ}) dφ = e^{−(X−ρ)²/2t} e^{−Xρ/t} I₀(Xρ/t) / t.
pub(crate) fn ring_gauss(t: f64, rx: f64, rho: f64) -> f64 {
    let d = rx - rho;
    (-d * d / (2.0 * t)).exp() * bessel_i0_scaled(rx * rho / t) / t
}

/// Returns (∫ P_s(x,y) P_t(y,z) dy, P_{s+t}(x,z)).
pub fn semigroup_pair<A, B, C>(
    ks: &A,
    kt: &B,
    kst: &C,
    x: [f64; 2],
    z: [f64; 2],
    nodes: &RadialNodes,
) -> (f64, f64)
where
    A: RadialKernel + ?Sized,
    B: RadialKernel + ?Sized,
    C: RadialKernel + ?Sized,
{
    let (s, t) = (ks.time(), kt.time());
    let (rx, rz) = (norm(x), norm(z));
    let mut conv = 0.0;
    for (&rho, &w) in nodes.rho.iter().zip(&nodes.weight) {
        let a = ks.k_radial(rx, rho);
        let b = kt.k_radial(rho, rz);
        let cross = a * ring_gauss(t, rz, rho) + ring_gauss(s, rx, rho) * b;
        conv += w * rho * (cross + 2.0 * PI * a * b);
    }
    conv += g2(s + t, dist2(x, z));
    let direct = g2(s + t, dist2(x, z)) + kst.k_radial(rx, rz);
    (conv, direct)
}

/// ∫ d^{T,ϑ}_{s,t}(x, y) dy.
pub fn doob_normalization(
    big_t: f64,
    theta: DisorderParam,
    s: f64,
    t: f64,
    x: [f64; 2],
) -> Result<f64> {
    check_doob_times(big_t, s, t)?;
    let rx = norm(x);
    let u = t - s;
    let nodes = RadialNodes::covering(rx, u);
    let rule = KernelRule::new(u, theta, 1e-9)?;
    let m_start = mass_or_one(big_t - s, theta, rx)?;
    let end = if big_t - t > 0.0 { Some(KernelRule::new(big_t - t, theta, 1e-9)?) } else { None };
    let mut sum = 0.0;
    for (&rho, &w) in nodes.rho.iter().zip(&nodes.weight) {
        let m_end = end.as_ref().map_or(1.0, |r| 1.0 + r.mass_excess(rho));
        let p_ring = ring_gauss(u, rx, rho) + 2.0 * PI * rule.k(rx, rho);
        sum += w * rho * m_end * p_ring;
    }
    Ok(sum / m_start)
}

/// Returns (∫ d_{s,u}(x,y) d_{u,t}(y,z) dy, d_{s,t}(x,z)) using a polar grid
/// with `n_angles` trapezoid angles.
pub fn chapman_doob(
    big_t: f64,
    theta: DisorderParam,
    (s, u, t): (f64, f64, f64),
    x: [f64; 2],
    z: [f64; 2],
    n_angles: usize,
) -> Result<(f64, f64)> {
    check_doob_times(big_t, s, u)?;
    check_doob_times(big_t, u, t)?;
    let (rx, rz) = (norm(x), norm(z));
    let first = KernelRule::new(u - s, theta, 1e-9)?;
    let second = KernelRule::new(t - u, theta, 1e-9)?;
    let whole = KernelRule::new(t - s, theta, 1e-9)?;
    let mid = KernelRule::new(big_t - u, theta, 1e-9)?;
    let m_s = mass_or_one(big_t - s, theta, rx)?;
    let m_t = mass_or_one(big_t - t, theta, rz)?;
    let span = (u - s).max(t - u);
    let nodes = RadialNodes::covering(rx.max(rz), span);
    let dphi = 2.0 * PI / n_angles as f64;
    let mut sum = 0.0;
    for (&rho, &w) in nodes.rho.iter().zip(&nodes.weight) {
        let m_u = 1.0 + mid.mass_excess(rho);
        let k1 = first.k(rx, rho);
        let k2 = second.k(rho, rz);
        let mut ring = 0.0;
        for j in 0..n_angles {
            let phi = j as f64 * dphi;
            let y = [rho * phi.cos(), rho * phi.sin()];
            let d1 = m_u / m_s * (g2(u - s, dist2(x, y)) + k1);
            let d2 = m_t / m_u * (g2(t - u, dist2(y, z)) + k2);
            ring += d1 * d2;
        }
        sum += w * rho * ring * dphi;
    }
    let direct = m_t / m_s * (g2(t - s, dist2(x, z)) + whole.k(rx, rz));
    Ok((sum, direct))
}
