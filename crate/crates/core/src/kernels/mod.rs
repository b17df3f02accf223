//! The point-interaction kernels K_t^ϑ and P_t^ϑ, total mass, drift and the
//! Doob transition density.
//!
//! Integrating the Gaussian pair over the split r + s′ = τ in closed form,
//!
//! ∫₀^τ g_r(x) g_{τ−r}(y) dr = e^{−(|x|²+|y|²)/2τ} K₀(|x||y|/τ) / (2π²τ),
//!
//! leaves a single time integral against ν′ for every quantity here.
//! [`KernelRule`] holds the quadrature nodes of that integral for one (t, ϑ).

mod grid;
mod radial;

pub use grid::{build_kernel_grid, GridSpec, KernelGrid, KernelGridHeader, GRID_FORMAT_VERSION};
pub(crate) use radial::ring_gauss;
pub use radial::{
    chapman_doob, doob_normalization, radial_integral, semigroup_pair, RadialNodes,
};

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::quad::push_nodes;
use crate::specfun::{
    a_nu_prime_from_ln, bessel_k0_scaled, expint_e1, g2, nu_from_ln, A_MAX,
};

/// The disorder parameter ϑ with its cached exponential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DisorderParam {
    pub theta: f64,
    pub exp_theta: f64,
}

impl DisorderParam {
    pub fn new(theta: f64) -> Self {
        DisorderParam { theta, exp_theta: theta.exp() }
    }

    pub fn shifted(&self, delta: f64) -> Self {
        DisorderParam::new(self.theta + delta)
    }
}

/// Drift magnitude at one radius; the direction is −y/|y|.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEval {
    pub t: f64,
    pub theta: DisorderParam,
    pub radius: f64,
    pub magnitude: f64,
}

impl DriftEval {
    /// The drift vector at `y`, which must point along the evaluated radius.
    pub fn vector(&self, y: [f64; 2]) -> [f64; 2] {
        let r = (y[0] * y[0] + y[1] * y[1]).sqrt();
        [-self.magnitude * y[0] / r, -self.magnitude * y[1] / r]
    }
}

/// Anything that returns K_t^ϑ as a function of the two radii.
pub trait RadialKernel: Sync {
    fn time(&self) -> f64;
    fn theta(&self) -> DisorderParam;
    fn k_radial(&self, rx: f64, ry: f64) -> f64;
}

const S_BREAKS: [f64; 6] = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
const A_ORDER: usize = 16;
const B_ORDER: usize = 12;
/// X²/(2τ) beyond which the Gaussian factors are below e^{-40}.
const TAIL_EXPONENT: f64 = 40.0;

/// Quadrature for ∫₀^t e^ϑ ν′(w e^ϑ) f(t − w) dw with nodes τ_i = t − w_i and
/// weights c_i that already contain e^ϑ ν′. Everything is computed from ln a,
/// so arbitrarily negative ϑ is fine.
#[derive(Debug, Clone)]
pub struct KernelRule {
    t: f64,
    theta: DisorderParam,
    r_min: f64,
    tau: Vec<f64>,
    c: Vec<f64>,
}

impl KernelRule {
    /// Builds the rule, resolving radii down to `r_min`.
    pub fn new(t: f64, theta: DisorderParam, r_min: f64) -> Result<Self> {
        check_time(t)?;
        if !(r_min > 0.0) {
            return Err(domain(format!("minimum radius must be positive, got {r_min}")));
        }
        if t * theta.exp_theta > A_MAX {
            return Err(Error::Overflow(format!(
                "t e^theta = {} exceeds {A_MAX}",
                t * theta.exp_theta
            )));
        }
        let mut tau = Vec::new();
        let mut c = Vec::new();
        let wc = 0.5 * t;

        // w ∈ (0, wc]. Moderate a = w e^ϑ > 1/e: linear panels in w.
        let a_hi = wc * theta.exp_theta;
        let (mut ws, mut ww) = (Vec::new(), Vec::new());
        let mut w_top = wc;
        if a_hi > (-1.0f64).exp() {
            w_top = (-1.0 - theta.theta).exp();
            let panels = ((a_hi - (-1.0f64).exp()) / 2.0).ceil().max(1.0) as usize;
            let h = (wc - w_top) / panels as f64;
            for k in 0..panels {
                push_nodes(w_top + k as f64 * h, w_top + (k + 1) as f64 * h, A_ORDER, &mut ws, &mut ww);
            }
        }
        for (w, wt) in ws.into_iter().zip(ww) {
            tau.push(t - w);
            c.push(wt * a_nu_prime_from_ln(w.ln() + theta.theta) / w);
        }
        // small a: s = ln(w_top / w) on dyadic panels, where e^ϑ ν′ dw = F ds
        let (mut ss, mut sw) = (Vec::new(), Vec::new());
        let mut lo = 0.0;
        for hi in S_BREAKS {
            push_nodes(lo, hi, A_ORDER, &mut ss, &mut sw);
            lo = hi;
        }
        for (s, wt) in ss.into_iter().zip(sw) {
            let ln_w = w_top.ln() - s;
            tau.push(t - ln_w.exp());
            c.push(wt * a_nu_prime_from_ln(ln_w + theta.theta));
        }
        // remaining tail in q = 1/ln(1/a), where F(−1/q)/q² → 1 as q → 0
        let q_end = 1.0 / (-(w_top.ln() + theta.theta) + lo);
        let (mut qs, mut qw) = (Vec::new(), Vec::new());
        push_nodes(0.0, 0.5 * q_end, A_ORDER, &mut qs, &mut qw);
        push_nodes(0.5 * q_end, q_end, A_ORDER, &mut qs, &mut qw);
        for (q, wt) in qs.into_iter().zip(qw) {
            let ln_w = -1.0 / q - theta.theta;
            tau.push(t - ln_w.exp());
            c.push(wt * a_nu_prime_from_ln(-1.0 / q) / (q * q));
        }

        // τ = wc e^{−u}
        let tau_min = (r_min * r_min / (2.0 * TAIL_EXPONENT)).min(0.5 * wc);
        let u_max = (wc / tau_min).ln().ceil();
        let (mut us, mut uw) = (Vec::new(), Vec::new());
        let mut u = 0.0;
        while u < u_max {
            push_nodes(u, u + 1.0, B_ORDER, &mut us, &mut uw);
            u += 1.0;
        }
        for (u, wt) in us.into_iter().zip(uw) {
            let s = wc * (-u).exp();
            let w = t - s;
            tau.push(s);
            c.push(wt * s * a_nu_prime_from_ln(w.ln() + theta.theta) / w);
        }
        Ok(KernelRule { t, theta, r_min, tau, c })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// The (τ_i, c_i) pairs.
    pub(crate) fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.tau.iter().copied().zip(self.c.iter().copied())
    }

    /// Σ c_i, which should equal ∫₀^t e^ϑ ν′(w e^ϑ) dw = ν(t e^ϑ).
    pub fn weight_sum(&self) -> f64 {
        self.c.iter().sum()
    }

    /// ν(t e^ϑ), the exact value of [`Self::weight_sum`].
    pub fn weight_sum_exact(&self) -> f64 {
        nu_from_ln(self.t.ln() + self.theta.theta)
    }

    /// K_t^ϑ from the radii.
    pub fn k(&self, rx: f64, ry: f64) -> f64 {
        let s2 = (rx + ry) * (rx + ry);
        let p = rx * ry;
        let mut sum = 0.0;
        for (&tau, &c) in self.tau.iter().zip(&self.c) {
            let e = s2 / (2.0 * tau);
            if e > 700.0 {
                continue;
            }
            sum += c / tau * (-e).exp() * bessel_k0_scaled(p / tau);
        }
        sum / PI
    }

    /// m(t, |x|) − 1.
    pub fn mass_excess(&self, r: f64) -> f64 {
        let r2 = r * r;
        let mut sum = 0.0;
        for (&tau, &c) in self.tau.iter().zip(&self.c) {
            let z = r2 / (2.0 * tau);
            if z > 700.0 {
                continue;
            }
            sum += c * expint_e1(z);
        }
        sum
    }

    /// ∂m/∂|x| (negative).
    pub fn mass_derivative(&self, r: f64) -> f64 {
        let r2 = r * r;
        let mut sum = 0.0;
        for (&tau, &c) in self.tau.iter().zip(&self.c) {
            let z = r2 / (2.0 * tau);
            if z > 700.0 {
                continue;
            }
            sum += c * (-z).exp();
        }
        -2.0 * sum / r
    }

    /// Drift magnitude −∂ₓm/m at radius `r`.
    pub fn drift_magnitude(&self, r: f64) -> f64 {
        -self.mass_derivative(r) / (1.0 + self.mass_excess(r))
    }
}

impl RadialKernel for KernelRule {
    fn time(&self) -> f64 {
        self.t
    }

    fn theta(&self) -> DisorderParam {
        self.theta
    }

    fn k_radial(&self, rx: f64, ry: f64) -> f64 {
        self.k(rx, ry)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(domain(format!("time must be positive and finite, got t = {t}")));
    }
    Ok(())
}

fn norm(x: [f64; 2]) -> f64 {
    (x[0] * x[0] + x[1] * x[1]).sqrt()
}

fn nonzero(x: [f64; 2], name: &str) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::Singularity(format!("{name} is at the origin, where the kernel diverges")));
    }
    if !r.is_finite() {
        return Err(domain(format!("{name} is not finite")));
    }
    Ok(r)
}

/// K_t^ϑ(x, y).
pub fn k_kernel(t: f64, theta: DisorderParam, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    check_time(t)?;
    let rx = nonzero(x, "x")?;
    let ry = nonzero(y, "y")?;
    let rule = KernelRule::new(t, theta, rx.max(ry))?;
    Ok(rule.k(rx, ry))
}

/// P_t^ϑ(x, y) = g_t(x − y) + K_t^ϑ(x, y).
pub fn p_kernel(t: f64, theta: DisorderParam, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    let k = k_kernel(t, theta, x, y)?;
    Ok(g2(t, dist2(x, y)) + k)
}

/// P from any radial kernel source.
pub fn p_from<K: RadialKernel + ?Sized>(kern: &K, x: [f64; 2], y: [f64; 2]) -> f64 {
    g2(kern.time(), dist2(x, y)) + kern.k_radial(norm(x), norm(y))
}

pub(crate) fn dist2(x: [f64; 2], y: [f64; 2]) -> f64 {
    let (a, b) = (x[0] - y[0], x[1] - y[1]);
    a * a + b * b
}

fn log_plus(v: f64) -> f64 {
    v.ln().max(0.0)
}

/// The envelope of K_t^ϑ(x, y) up to a (T, ϑ)-dependent constant.
pub fn kernel_upper_envelope(t: f64, _theta: DisorderParam, x: [f64; 2], y: [f64; 2]) -> f64 {
    let (x2, y2) = (x[0] * x[0] + x[1] * x[1], y[0] * y[0] + y[1] * y[1]);
    let fx = (-x2 / (2.0 * t)).exp() + log_plus(t / x2);
    let fy = (-y2 / (2.0 * t)).exp() + log_plus(t / y2);
    fx * fy / (t * (1.0 + log_plus(1.0 / t)))
}

/// m(t, x) = ∫ P_t^ϑ(x, y) dy.
pub fn total_mass(t: f64, theta: DisorderParam, x: [f64; 2]) -> Result<f64> {
    check_time(t)?;
    let r = nonzero(x, "x")?;
    let rule = KernelRule::new(t, theta, r)?;
    Ok(1.0 + rule.mass_excess(r))
}

/// b_t^ϑ(y) = ∇ ln m(t, y).
pub fn drift(t: f64, theta: DisorderParam, y: [f64; 2]) -> Result<[f64; 2]> {
    Ok(drift_eval(t, theta, y)?.vector(y))
}

/// Drift magnitude at |y|.
pub fn drift_eval(t: f64, theta: DisorderParam, y: [f64; 2]) -> Result<DriftEval> {
    check_time(t)?;
    let r = nonzero(y, "y")?;
    let rule = KernelRule::new(t, theta, r)?;
    Ok(DriftEval { t, theta, radius: r, magnitude: rule.drift_magnitude(r) })
}

/// d^{T,ϑ}_{s,t}(x, y) = m(T−t, y) / m(T−s, x) · P^ϑ_{t−s}(x, y).
pub fn doob_density(
    big_t: f64,
    theta: DisorderParam,
    s: f64,
    t: f64,
    x: [f64; 2],
    y: [f64; 2],
) -> Result<f64> {
    check_doob_times(big_t, s, t)?;
    let rx = nonzero(x, "x")?;
    let ry = nonzero(y, "y")?;
    let m_end = mass_or_one(big_t - t, theta, ry)?;
    let m_start = mass_or_one(big_t - s, theta, rx)?;
    Ok(m_end / m_start * p_kernel(t - s, theta, x, y)?)
}

pub(crate) fn check_doob_times(big_t: f64, s: f64, t: f64) -> Result<()> {
    if !(s >= 0.0 && s < t && t <= big_t) {
        return Err(Error::Ordering(format!(
            "need 0 <= s < t <= T, got s = {s}, t = {t}, T = {big_t}"
        )));
    }
    Ok(())
}

pub(crate) fn mass_or_one(t: f64, theta: DisorderParam, r: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 + KernelRule::new(t, theta, r)?.mass_excess(r))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn disorder_param_cache() {
        let d = DisorderParam::new(0.7);
        assert_eq!(d.exp_theta, 0.7f64.exp());
        assert!((d.shifted(2f64.ln()).exp_theta - 2.0 * d.exp_theta).abs() < 1e-14);
    }

    #[test]
    fn weights_integrate_nu_prime() {
        for (t, th) in [(1.0, 0.0), (0.1, -1.0), (2.0, 1.5), (1e-3, 0.0), (1.0, -1e6)] {
            let rule = KernelRule::new(t, DisorderParam::new(th), 1e-4).unwrap();
            assert!(rel(rule.weight_sum(), rule.weight_sum_exact()) < 1e-8, "t={t} th={th}");
        }
    }

    #[test]
    fn symmetric_in_radii() {
        let rule = KernelRule::new(0.7, DisorderParam::new(0.3), 0.01).unwrap();
        for (a, b) in [(0.01, 2.0), (0.3, 0.5), (1.2, 0.05)] {
            assert!(rel(rule.k(a, b), rule.k(b, a)) < 1e-12);
        }
    }

    #[test]
    fn domain_errors() {
        let th = DisorderParam::new(0.0);
        assert!(matches!(k_kernel(0.0, th, [1.0, 0.0], [1.0, 0.0]), Err(Error::Domain(_))));
        assert!(matches!(k_kernel(1.0, th, [0.0, 0.0], [1.0, 0.0]), Err(Error::Singularity(_))));
        assert!(matches!(drift(1.0, th, [0.0, 0.0]), Err(Error::Singularity(_))));
        assert!(matches!(total_mass(1.0, th, [0.0, 0.0]), Err(Error::Singularity(_))));
        assert!(matches!(
            doob_density(1.0, th, 0.5, 0.5, [1.0, 0.0], [1.0, 0.0]),
            Err(Error::Ordering(_))
        ));
        assert!(matches!(
            doob_density(1.0, th, 0.0, 1.5, [1.0, 0.0], [1.0, 0.0]),
            Err(Error::Ordering(_))
        ));
    }

    #[test]
    fn far_field_mass_is_one() {
        let m = total_mass(1.0, DisorderParam::new(0.0), [50.0, 0.0]).unwrap();
        assert!((m - 1.0).abs() < 1e-10);
    }

    #[test]
    fn strongly_negative_theta_is_gaussian() {
        // K is suppressed only like 1/|ϑ|, so the Gaussian limit needs |ϑ| huge
        for (x, y) in [([0.5, 0.0], [0.0, 0.7]), ([1.0, 1.0], [-0.5, 0.2])] {
            let g = g2(1.0, dist2(x, y));
            let p = p_kernel(1.0, DisorderParam::new(-1e8), x, y).unwrap();
            assert!(rel(p, g) < 1e-6);
            let k30 = k_kernel(1.0, DisorderParam::new(-30.0), x, y).unwrap();
            let k60 = k_kernel(1.0, DisorderParam::new(-60.0), x, y).unwrap();
            assert!(k30 / g < 0.1 && k30 / g > 1e-3);
            assert!((k30 / k60 - 2.0).abs() < 0.1, "{}", k30 / k60);
        }
    }

    #[test]
    fn p_increases_in_theta() {
        let (x, y) = ([0.4, 0.1], [-0.3, 0.6]);
        let ps: Vec<f64> =
            [-1.0, 0.0, 1.0].iter().map(|&th| p_kernel(0.8, DisorderParam::new(th), x, y).unwrap()).collect();
        assert!(ps[0] < ps[1] && ps[1] < ps[2]);
    }

    #[test]
    fn log_divergence_at_origin() {
        let th = DisorderParam::new(0.0);
        let ks: Vec<f64> = (4..16)
            .map(|k| k_kernel(1.0, th, [2f64.powi(-k), 0.0], [1.0, 0.0]).unwrap())
            .collect();
        let incs: Vec<f64> = ks.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(incs.iter().all(|&d| d > 0.0));
        // equal increments per halving: K grows like ln(1/δ)
        let last = incs[incs.len() - 1];
        let prev = incs[incs.len() - 2];
        assert!(rel(last, prev) < 1e-2, "{incs:?}");
    }

    #[test]
    fn mass_log_divergence() {
        let th = DisorderParam::new(0.0);
        let q: Vec<f64> = (4..=14)
            .map(|k| {
                let d = 2f64.powi(-k);
                (total_mass(1.0, th, [d, 0.0]).unwrap() - 1.0) / (1.0 / d).ln()
            })
            .collect();
        assert!(q.iter().all(|&v| v > 0.0));
        let d: Vec<f64> = q.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(d.windows(2).all(|w| w[1] < w[0]), "{q:?}");
    }

    #[test]
    fn mass_monotonicity() {
        let base = |t: f64, th: f64, r: f64| total_mass(t, DisorderParam::new(th), [r, 0.0]).unwrap() - 1.0;
        let m0 = base(0.5, 0.0, 0.3);
        assert!(m0 > 0.0);
        assert!(base(0.5, 0.5, 0.3) > m0);
        assert!(base(0.7, 0.0, 0.3) > m0);
        assert!(base(0.5, 0.0, 0.4) < m0);
    }

    #[test]
    fn drift_direction_and_finite_difference() {
        let th = DisorderParam::new(0.0);
        let b = drift(1.0, th, [0.3, 0.4]).unwrap();
        let k = b[0] / 0.3;
        assert!(k < 0.0 && rel(b[1], k * 0.4) < 1e-12);
        for r in [0.1, 0.5, 1.0] {
            let h = 1e-4 * r;
            let lm = |r: f64| total_mass(1.0, th, [r, 0.0]).unwrap().ln();
            let fd = (lm(r + h) - lm(r - h)) / (2.0 * h);
            let mag = drift_eval(1.0, th, [r, 0.0]).unwrap().magnitude;
            assert!(rel(-fd, mag) < 1e-4, "r={r}");
        }
    }

    #[test]
    fn drift_small_radius_product() {
        let th = DisorderParam::new(0.0);
        let y = 1e-4;
        let b = drift_eval(1.0, th, [y, 0.0]).unwrap().magnitude;
        let prod = b * y * (1.0 / y).ln();
        assert!(prod > 0.85 && prod < 1.15, "{prod}");
    }

    #[test]
    fn envelope_examples() {
        let th = DisorderParam::new(0.0);
        let t: f64 = 0.25;
        let x = [t.sqrt(), 0.0];
        let want = (-0.5f64).exp().powi(2) / (t * (1.0 + (1.0 / t).ln()));
        assert!(rel(kernel_upper_envelope(t, th, x, x), want) < 1e-14);
        let e1 = kernel_upper_envelope(t, th, [0.2, 0.0], [0.5, 0.0]);
        let e2 = kernel_upper_envelope(t, th, [0.3, 0.0], [0.5, 0.0]);
        assert!(e2 < e1);
    }

    #[test]
    fn doob_gaussian_limit() {
        let th = DisorderParam::new(-1e8);
        let (x, y) = ([1.0, 0.0], [0.4, 0.5]);
        let d = doob_density(1.0, th, 0.0, 0.5, x, y).unwrap();
        assert!((d - g2(0.5, dist2(x, y))).abs() < 1e-5);
    }
}
