//! Finite-dimensional sampling of the path measure V^{T,ϑ}_x on a fine time
//! grid through its Doob chain, without the SDE, and the Radon–Nikodym
//! reweighting check.
//!
//! A step from x at time t draws y from d^{T,ϑ}_{t,t+δ}(x, ·) ∝ m(T−t−δ, y) P_δ(x, y)
//! by rejection: propose from P_δ(x, ·)/m(δ, x) and accept with probability
//! m(T−t−δ, y)/M, where M bounds m over the radii the proposal can reach.
//! The K part of P_δ is proposed exactly through
//!
//! K_δ(x, y) = 2π Σᵢ cᵢ ∫₀^{τᵢ} g_u(x) g_{τᵢ−u}(y) du:
//!
//! the latent u has density ∝ g_u(x) Σ_{τᵢ ≥ u} cᵢ, and given u the node i is
//! drawn ∝ cᵢ among τᵢ ≥ u, then y ~ N(0, (τᵢ − u) I).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::kernels::{dist2, total_mass, DisorderParam, KernelRule};
use crate::rng::stream_rng;
use crate::specfun::{expint_e1, g2};

use super::loctime::{normalization, segment_occupation};

const VCHAIN_TAG: u64 = 0x7663_6861_696e;
/// Steps with |x|²/2δ above this propose no K part (E₁ < e^{-40}).
const FAR_EXPONENT: f64 = 40.0;
/// Proposals farther than this many √δ from x are treated as unreachable
/// when bounding m.
const REACH: f64 = 8.0;
/// Reweighted averages with a smaller effective sample size are flagged.
pub const ESS_THRESHOLD: f64 = 500.0;

/// m(τ, ρ) − 1 depends only on a = ϑ + ln τ and s = ln(ρ/√τ). The table holds
/// ln(m − 1) + e^{2s}/2 on a uniform (a, s) grid, interpolated bilinearly.
#[derive(Debug, Clone)]
pub(crate) struct MassTable {
    theta: f64,
    a0: f64,
    na: usize,
    s0: f64,
    ns: usize,
    vals: Vec<f64>,
}

const TABLE_DA: f64 = 0.05;
const TABLE_DS: f64 = 0.02;
const TABLE_S_MIN: f64 = -16.0;

impl MassTable {
    pub(crate) fn new(theta: DisorderParam, tau_min: f64, tau_max: f64) -> Result<Self> {
        let a0 = theta.theta + tau_min.ln() - TABLE_DA;
        let na = ((tau_max / tau_min).ln() / TABLE_DA).ceil() as usize + 3;
        let s_max = (2.0 * FAR_EXPONENT).sqrt().ln();
        let ns = ((s_max - TABLE_S_MIN) / TABLE_DS).ceil() as usize + 1;
        let rows = (0..na)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let rule = KernelRule::new(1.0, DisorderParam::new(a0 + i as f64 * TABLE_DA), TABLE_S_MIN.exp())?;
                Ok((0..ns)
                    .map(|j| {
                        let s = TABLE_S_MIN + j as f64 * TABLE_DS;
                        rule.mass_excess(s.exp()).max(1e-300).ln() + 0.5 * (2.0 * s).exp()
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(MassTable { theta: theta.theta, a0, na, s0: TABLE_S_MIN, ns, vals: rows.concat() })
    }

    fn excess_at(&self, i: usize, a: f64, j: usize, b: f64) -> f64 {
        let v = |i: usize, j: usize| self.vals[i * self.ns + j];
        let top = (1.0 - b) * v(i, j) + b * v(i, j + 1);
        let bot = (1.0 - b) * v(i + 1, j) + b * v(i + 1, j + 1);
        let s = self.s0 + (j as f64 + b) * TABLE_DS;
        ((1.0 - a) * top + a * bot - 0.5 * (2.0 * s).exp()).exp()
    }

    /// m(τ, ρ), with m(0, ·) = 1.
    pub(crate) fn mass(&self, tau: f64, rho: f64) -> f64 {
        if tau <= 0.0 {
            return 1.0;
        }
        let ua = ((self.theta + tau.ln() - self.a0) / TABLE_DA).clamp(0.0, (self.na - 1) as f64 - 1e-9);
        let i = ua.floor() as usize;
        let a = ua - i as f64;
        let us = ((rho / tau.sqrt()).max(1e-300).ln() - self.s0) / TABLE_DS;
        if us >= (self.ns - 1) as f64 {
            return 1.0;
        }
        if us < 0.0 {
            // m − 1 is linear in ln ρ near the origin
            let e0 = self.excess_at(i, a, 0, 0.0);
            let e1 = self.excess_at(i, a, 1, 0.0);
            return 1.0 + e0 + us * (e1 - e0);
        }
        let j = us.floor() as usize;
        1.0 + self.excess_at(i, a, j, us - j as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VChainEnsemble {
    pub big_t: f64,
    pub theta: DisorderParam,
    pub x0: [f64; 2],
    pub dt: f64,
    pub seed: u64,
    /// m(T, ϑ, x₀), the total mass of V^{T,ϑ}_{x₀}.
    pub total_mass: f64,
    /// Ball radii whose occupation times were accumulated.
    pub radii: Vec<f64>,
    /// occupation[i][j]: time chain i spends within radii[j] of the origin,
    /// with |x| interpolated linearly between grid points.
    pub occupation: Vec<Vec<f64>>,
    pub ends: Vec<[f64; 2]>,
}

/// Draws z with density ∝ e^{−z}/z on [a, ∞).
fn sample_e1_tail(a: f64, rng: &mut ChaCha8Rng) -> f64 {
    if a >= 1.0 {
        loop {
            let e: f64 = Exp1.sample(rng);
            let z = a + e;
            if rng.random::<f64>() * z <= a {
                return z;
            }
        }
    }
    let w_b = expint_e1(1.0);
    let w_a = expint_e1(a) - w_b;
    if rng.random::<f64>() * (w_a + w_b) < w_a {
        loop {
            let z = a.powf(1.0 - rng.random::<f64>());
            if rng.random::<f64>() <= (a - z).exp() {
                return z;
            }
        }
    }
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = 1.0 + e;
        if rng.random::<f64>() * z <= 1.0 {
            return z;
        }
    }
}

/// The K part of P_δ as Σᵢ cᵢ over nodes sorted by decreasing τᵢ, with
/// prefix sums C so that C(u) = Σ_{τᵢ ≥ u} cᵢ.
struct KNodes {
    tau: Vec<f64>,
    cum: Vec<f64>,
}

impl KNodes {
    fn new(rule: &KernelRule) -> Self {
        let mut nodes: Vec<(f64, f64)> = rule.nodes().collect();
        nodes.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut cum = Vec::with_capacity(nodes.len() + 1);
        cum.push(0.0);
        for &(_, c) in &nodes {
            cum.push(cum.last().unwrap() + c);
        }
        KNodes { tau: nodes.into_iter().map(|n| n.0).collect(), cum }
    }

    fn total(&self) -> f64 {
        *self.cum.last().unwrap()
    }
}

struct Stepper<'a> {
    k: &'a KNodes,
    mass: &'a MassTable,
    dt: f64,
}

impl Stepper<'_> {
    /// One Doob step from x; `tau_next` is the remaining horizon after it.
    ///
    /// Proposals come from g_δ(x − ·) + K̃ with K̃ ≥ K the kernel in which C(u)
    /// is replaced by C(0), so K̃ has mass C(0) E₁(|x|²/2τ_max); a K̃ draw with
    /// latent u is kept with probability C(u)/C(0).
    fn step(&self, x: [f64; 2], tau_next: f64, rng: &mut ChaCha8Rng) -> [f64; 2] {
        let sd = self.dt.sqrt();
        let r2 = x[0] * x[0] + x[1] * x[1];
        let r = r2.sqrt();
        let a = r2 / (2.0 * self.k.tau[0]);
        let envelope = if r2 / (2.0 * self.dt) <= FAR_EXPONENT { self.k.total() * expint_e1(a) } else { 0.0 };
        let bound = self.mass.mass(tau_next, (r - REACH * sd).max(1e-6 * sd));
        loop {
            let z0: f64 = StandardNormal.sample(rng);
            let z1: f64 = StandardNormal.sample(rng);
            let y = if rng.random::<f64>() * (1.0 + envelope) < 1.0 {
                [x[0] + sd * z0, x[1] + sd * z1]
            } else {
                let u = r2 / (2.0 * sample_e1_tail(a, rng));
                let n_u = self.k.tau.partition_point(|&t| t >= u);
                let c_u = self.k.cum[n_u];
                if rng.random::<f64>() * self.k.total() >= c_u {
                    continue;
                }
                let pick = rng.random::<f64>() * c_u;
                let i = (self.k.cum.partition_point(|&c| c <= pick) - 1).min(n_u - 1);
                let s = (self.k.tau[i] - u).max(0.0).sqrt();
                [s * z0, s * z1]
            };
            if tau_next <= 0.0 {
                return y;
            }
            let m = self.mass.mass(tau_next, (y[0] * y[0] + y[1] * y[1]).sqrt());
            if rng.random::<f64>() * bound <= m {
                return y;
            }
        }
    }
}

/// Samples `n_paths` Doob chains on the grid δ = `dt` over [0, T],
/// accumulating occupation times of the balls of the given radii.
pub fn sample_v_chain(
    big_t: f64,
    theta: DisorderParam,
    x0: [f64; 2],
    dt: f64,
    n_paths: usize,
    radii: &[f64],
    seed: u64,
) -> Result<VChainEnsemble> {
    if x0 == [0.0, 0.0] {
        return Err(Error::Singularity("chains cannot start at the origin".into()));
    }
    if !(dt > 0.0) || !(big_t > 0.0) {
        return Err(domain(format!("need T > 0 and dt > 0, got T = {big_t}, dt = {dt}")));
    }
    let n_steps = (big_t / dt).round() as usize;
    if n_steps == 0 || (n_steps as f64 * dt - big_t).abs() > 1e-9 * big_t {
        return Err(domain(format!("dt = {dt} does not divide T = {big_t}")));
    }
    if n_paths == 0 {
        return Err(domain("no paths requested"));
    }
    let rule = KernelRule::new(dt, theta, 1e-6 * dt.sqrt())?;
    let mass = MassTable::new(theta, dt, big_t)?;
    let knodes = KNodes::new(&rule);
    let stepper = Stepper { k: &knodes, mass: &mass, dt };
    let rows: Vec<(Vec<f64>, [f64; 2])> = (0..n_paths)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, VCHAIN_TAG, i as u64);
            let mut occ = vec![0.0; radii.len()];
            let mut x = x0;
            let mut rx = (x[0] * x[0] + x[1] * x[1]).sqrt();
            for k in 0..n_steps {
                let tau_next = (n_steps - k - 1) as f64 * dt;
                let y = stepper.step(x, tau_next, &mut rng);
                let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
                for (o, &eps) in occ.iter_mut().zip(radii) {
                    *o += segment_occupation(rx, ry, eps, dt);
                }
                x = y;
                rx = ry;
            }
            (occ, x)
        })
        .collect();
    let (occupation, ends) = rows.into_iter().unzip();
    Ok(VChainEnsemble {
        big_t,
        theta,
        x0,
        dt,
        seed,
        total_mass: total_mass(big_t, theta, x0)?,
        radii: radii.to_vec(),
        occupation,
        ends,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnCheck {
    pub epsilon: f64,
    pub theta: f64,
    pub theta_prime: f64,
    /// ⟨V^{ϑ′}, 1⟩ = m(T, ϑ′, x₀) from the kernels.
    pub lhs: f64,
    /// m(T, ϑ, x₀) · E_{P^ϑ}[exp{(ϑ′ − ϑ) L^ε}] from the chains.
    pub rhs: f64,
    pub rhs_se: f64,
    pub ratio: f64,
    pub ratio_se: f64,
    pub ess: f64,
    /// True when the effective sample size is below [`ESS_THRESHOLD`].
    pub low_ess: bool,
}

/// Compares the total mass of V^{ϑ′} with the reweighted V^ϑ ensemble, using
/// L^ε from the occupation time of the ε-ball.
pub fn rn_reweight_check(ensemble: &VChainEnsemble, theta_prime: f64, eps: f64) -> Result<RnCheck> {
    let dth = theta_prime - ensemble.theta.theta;
    if dth.abs() > 1.0 {
        return Err(domain(format!("|theta' - theta| = {} exceeds 1", dth.abs())));
    }
    let c = normalization(eps)?;
    let j = ensemble
        .radii
        .iter()
        .position(|&r| (r - eps).abs() <= 1e-12 * eps)
        .ok_or_else(|| domain(format!("epsilon {eps} was not recorded")))?;
    let f: Vec<f64> = ensemble.occupation.iter().map(|o| (dth * c * o[j]).exp()).collect();
    let n = f.len() as f64;
    if n < 2.0 {
        return Err(domain("at least two chains are needed"));
    }
    let mean = f.iter().sum::<f64>() / n;
    let var = f.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let m = ensemble.total_mass;
    let (rhs, rhs_se) = (m * mean, m * (var / n).sqrt());
    let ess = f.iter().sum::<f64>().powi(2) / f.iter().map(|v| v * v).sum::<f64>();
    let lhs = total_mass(ensemble.big_t, DisorderParam::new(theta_prime), ensemble.x0)?;
    let ratio = lhs / rhs;
    Ok(RnCheck {
        epsilon: eps,
        theta: ensemble.theta.theta,
        theta_prime,
        lhs,
        rhs,
        rhs_se,
        ratio,
        ratio_se: ratio * rhs_se / rhs,
        ess,
        low_ess: ess < ESS_THRESHOLD,
    })
}

/// Density of the pushforward of V^{T,ϑ}_x to the times t₁ < … < t_m:
/// Π_j P^ϑ_{t_j − t_{j−1}}(y_{j−1}, y_j) with y₀ = x, t₀ = 0.
#[derive(Debug, Clone)]
pub struct FiniteDimV {
    pub x: [f64; 2],
    pub big_t: f64,
    pub times: Vec<f64>,
    rules: Vec<KernelRule>,
}

pub fn finite_dim_v_density(partition: &[f64], big_t: f64, theta: DisorderParam, x: [f64; 2]) -> Result<FiniteDimV> {
    if x == [0.0, 0.0] {
        return Err(Error::Singularity("the start is at the origin".into()));
    }
    if partition.is_empty() {
        return Err(domain("empty partition"));
    }
    let mut prev = 0.0;
    let mut rules = Vec::with_capacity(partition.len());
    for &t in partition {
        if !(t > prev && t <= big_t) {
            return Err(Error::Ordering(format!("partition must increase within (0, {big_t}], got {partition:?}")));
        }
        rules.push(KernelRule::new(t - prev, theta, 1e-9)?);
        prev = t;
    }
    Ok(FiniteDimV { x, big_t, times: partition.to_vec(), rules })
}

impl FiniteDimV {
    pub fn density(&self, ys: &[[f64; 2]]) -> Result<f64> {
        if ys.len() != self.times.len() {
            return Err(Error::Shape(format!("{} points for {} times", ys.len(), self.times.len())));
        }
        let norm = |p: [f64; 2]| (p[0] * p[0] + p[1] * p[1]).sqrt();
        let mut prev = self.x;
        let mut d = 1.0;
        for (rule, &y) in self.rules.iter().zip(ys) {
            let ry = norm(y);
            if ry == 0.0 {
                return Err(Error::Singularity("a point is at the origin".into()));
            }
            d *= g2(rule.t(), dist2(prev, y)) + rule.k(norm(prev), ry);
            prev = y;
        }
        Ok(d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{p_kernel, RadialNodes};
    use crate::polymer::RadialReference;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    #[test]
    fn e1_tail_sampler_matches_its_cdf() {
        // P(Z > b) = E₁(b)/E₁(a)
        for a in [0.01, 0.5, 2.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let n = 40_000;
            for b in [a * 1.5, a + 1.0] {
                let hits = (0..n).filter(|_| sample_e1_tail(a, &mut rng) > b).count() as f64 / n as f64;
                let want = expint_e1(b) / expint_e1(a);
                let se = (want * (1.0 - want) / n as f64).sqrt();
                assert!((hits - want).abs() < 4.0 * se, "{a} {b}: {hits} {want}");
            }
        }
    }

    #[test]
    fn mass_table_matches_kernels() {
        let th = DisorderParam::new(0.4);
        let table = MassTable::new(th, 1e-3, 1.0).unwrap();
        for (tau, rho) in [(1.0, 0.3), (0.5, 1e-5), (0.0123, 0.05), (1e-3, 0.2), (0.3, 2.0), (0.77, 1e-9)] {
            let want = 1.0 + KernelRule::new(tau, th, rho).unwrap().mass_excess(rho);
            let got = table.mass(tau, rho);
            assert!((got / want - 1.0).abs() < 2e-4, "{tau} {rho}: {got} {want}");
        }
        assert_eq!(table.mass(0.0, 0.1), 1.0);
        assert_eq!(table.mass(0.01, 5.0), 1.0);
    }

    #[test]
    fn chain_endpoints_follow_the_doob_law() {
        // twenty Doob steps compose to the one-step law of X_T
        let th = DisorderParam::new(0.5);
        let e = sample_v_chain(1.0, th, [0.3, 0.0], 0.05, 20_000, &[0.05], 2).unwrap();
        let reference = RadialReference::new(1.0, th, 1.0, 0.3).unwrap();
        let radii: Vec<f64> = e.ends.iter().map(|y| (y[0] * y[0] + y[1] * y[1]).sqrt()).collect();
        let g = reference.gof(&radii, 16, 0).unwrap();
        assert!(g.p_value > 1e-3, "{g:?}");
    }

    #[test]
    fn equal_theta_is_exact() {
        let th = DisorderParam::new(0.0);
        let e = sample_v_chain(0.1, th, [0.1, 0.0], 0.01, 50, &[0.05], 1).unwrap();
        let r = rn_reweight_check(&e, 0.0, 0.05).unwrap();
        assert!((r.lhs - r.rhs).abs() < 1e-12 * r.lhs && r.rhs_se == 0.0);
        assert!((r.ess - 50.0).abs() < 1e-9);
    }

    #[test]
    fn chain_checks() {
        let th = DisorderParam::new(0.0);
        assert!(sample_v_chain(1.0, th, [0.0, 0.0], 0.1, 2, &[0.1], 1).is_err());
        assert!(sample_v_chain(1.0, th, [0.1, 0.0], 0.3, 2, &[0.1], 1).is_err());
        let e = sample_v_chain(0.1, th, [0.1, 0.0], 0.01, 20, &[0.1], 1).unwrap();
        assert_eq!(e, sample_v_chain(0.1, th, [0.1, 0.0], 0.01, 20, &[0.1], 1).unwrap());
        assert!(rn_reweight_check(&e, 1.5, 0.1).is_err());
        assert!(rn_reweight_check(&e, 0.5, 0.2).is_err());
        assert!(!rn_reweight_check(&e, 0.5, 0.1).unwrap().low_ess || e.ends.len() < 500);
    }

    fn polar_integral(f: impl Fn([f64; 2]) -> f64, nodes: &RadialNodes, n_angles: usize) -> f64 {
        let dphi = 2.0 * PI / n_angles as f64;
        let mut s = 0.0;
        for (&r, &w) in nodes.rho.iter().zip(&nodes.weight) {
            for j in 0..n_angles {
                let phi = (j as f64 + 0.5) * dphi;
                s += w * r * dphi * f([r * phi.cos(), r * phi.sin()]);
            }
        }
        s
    }

    #[test]
    fn finite_dim_density() {
        let th = DisorderParam::new(0.3);
        let x = [0.4, 0.1];
        let one = finite_dim_v_density(&[0.5], 1.0, th, x).unwrap();
        let y = [0.2, -0.3];
        assert!((one.density(&[y]).unwrap() / p_kernel(0.5, th, x, y).unwrap() - 1.0).abs() < 1e-6);
        let nodes = RadialNodes::covering(0.5, 0.5);
        let total = polar_integral(|y| one.density(&[y]).unwrap(), &nodes, 128);
        let m = total_mass(0.5, th, x).unwrap();
        assert!((total / m - 1.0).abs() < 1e-3, "{total} {m}");
        // integrating out the interior point gives the one-time density
        let two = finite_dim_v_density(&[0.2, 0.5], 1.0, th, x).unwrap();
        let z = [0.3, 0.3];
        let nodes = RadialNodes::covering(0.5, 0.3);
        let marg = polar_integral(|y| two.density(&[y, z]).unwrap(), &nodes, 128);
        let want = p_kernel(0.5, th, x, z).unwrap();
        assert!((marg / want - 1.0).abs() < 1e-3, "{marg} {want}");
        assert!(finite_dim_v_density(&[0.5], 1.0, th, [0.0, 0.0]).is_err());
        assert!(finite_dim_v_density(&[0.5, 0.4], 1.0, th, x).is_err());
        assert!(one.density(&[[0.0, 0.0]]).is_err());
    }
}
