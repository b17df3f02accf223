//! Pairings of second-moment measures on (R⁴)² against φ⊗φ for Gaussian
//! mixture test functions φ(x, y) = Σ aᵢ exp(−|x−mᵢ|²/2c − |y−nᵢ|²/2c).
//!
//! In the coordinates ξ = (x+x′)/√2, η = (x−x′)/√2 every measure built from
//! Q, K and Gaussian glues is a product of a heat kernel in ξ and a chain of
//! P, K and g operators in η, and φ⊗φ splits the same way. The ξ part is a
//! closed-form Gaussian; the η part is evaluated on radial nodes, where every
//! kernel only needs its angular average.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{build_kernel_grid, DisorderParam, GridSpec, KernelGrid, RadialKernel, RadialNodes};
use crate::specfun::{bessel_i0_scaled, g2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussTerm {
    pub coef: f64,
    pub mx: [f64; 2],
    pub my: [f64; 2],
}

/// φ(x, y) = Σ coef·exp(−|x−mx|²/2c − |y−my|²/2c) with a shared variance c.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianTest {
    pub var: f64,
    pub terms: Vec<GaussTerm>,
}

impl GaussianTest {
    pub fn single(var: f64, mx: [f64; 2], my: [f64; 2]) -> Self {
        GaussianTest { var, terms: vec![GaussTerm { coef: 1.0, mx, my }] }
    }

    pub fn eval(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coef * (-(d2(x, t.mx) + d2(y, t.my)) / (2.0 * self.var)).exp())
            .sum()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.var > 0.0) || self.terms.is_empty() {
            return Err(Error::Domain("test function needs a positive variance and at least one term".into()));
        }
        Ok(())
    }

    fn reach(&self) -> f64 {
        let mut r: f64 = 0.0;
        for a in &self.terms {
            for b in &self.terms {
                r = r.max(norm(sub(a.mx, b.mx))).max(norm(sub(a.my, b.my)));
            }
        }
        r * FRAC_1_SQRT_2
    }
}

/// One factor of the η chain.
#[derive(Clone, Copy)]
pub enum ChainOp<'a> {
    /// g_σ.
    Heat(f64),
    /// K_t.
    Kernel(&'a dyn RadialKernel),
    /// P_t = g_t + K_t.
    Semigroup(&'a dyn RadialKernel),
}

impl ChainOp<'_> {
    fn time(&self) -> f64 {
        match self {
            ChainOp::Heat(s) => *s,
            ChainOp::Kernel(k) | ChainOp::Semigroup(k) => k.time(),
        }
    }
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

/// ∫₀^{2π} g_t(X − ρe^{iφ}) dφ.
fn ring(t: f64, x: f64, rho: f64) -> f64 {
    let d = x - rho;
    (-d * d / (2.0 * t)).exp() * bessel_i0_scaled(x * rho / t) / t
}

/// A function of η: Gaussian terms coef·exp(−|η−μ|²/2v) plus a radial part.
struct Field {
    gauss: Vec<(f64, [f64; 2], f64)>,
    radial: Vec<f64>,
}

struct Chain<'a> {
    nodes: &'a RadialNodes,
}

impl Chain<'_> {
    /// Angular integral of the field at each node.
    fn angular(&self, f: &Field) -> Vec<f64> {
        self.nodes
            .rho
            .iter()
            .zip(&f.radial)
            .map(|(&r, &rad)| {
                let g: f64 = f.gauss.iter().map(|&(c, mu, v)| c * 2.0 * PI * v * ring(v, norm(mu), r)).sum();
                2.0 * PI * rad + g
            })
            .collect()
    }

    fn apply_kernel(&self, k: &dyn RadialKernel, f: &Field) -> Vec<f64> {
        let ang = self.angular(f);
        let n = &self.nodes;
        let src: Vec<f64> = ang.iter().zip(&n.rho).zip(&n.weight).map(|((a, r), w)| a * r * w).collect();
        n.rho
            .par_iter()
            .map(|&ri| src.iter().zip(&n.rho).map(|(&s, &rj)| if s == 0.0 { 0.0 } else { s * k.k_radial(rj, ri) }).sum())
            .collect()
    }

    fn apply_heat(&self, sigma: f64, f: &Field) -> Field {
        let n = &self.nodes;
        let src: Vec<f64> = f.radial.iter().zip(&n.rho).zip(&n.weight).map(|((a, r), w)| a * r * w).collect();
        let radial = n
            .rho
            .iter()
            .map(|&ri| src.iter().zip(&n.rho).map(|(&s, &rj)| s * ring(sigma, ri, rj)).sum())
            .collect();
        let gauss = f.gauss.iter().map(|&(c, mu, v)| (c * v / (v + sigma), mu, v + sigma)).collect();
        Field { gauss, radial }
    }

    fn apply(&self, op: ChainOp, f: Field) -> Field {
        match op {
            ChainOp::Heat(s) => self.apply_heat(s, &f),
            ChainOp::Kernel(k) => Field { gauss: Vec::new(), radial: self.apply_kernel(k, &f) },
            ChainOp::Semigroup(k) => {
                let kpart = self.apply_kernel(k, &f);
                let mut h = self.apply_heat(k.time(), &f);
                h.radial.iter_mut().zip(kpart).for_each(|(a, b)| *a += b);
                h
            }
        }
    }

    /// ∫ f(η) exp(−|η−ν|²/2c) dη.
    fn close(&self, f: &Field, nu: [f64; 2], c: f64) -> f64 {
        let g: f64 = f
            .gauss
            .iter()
            .map(|&(a, mu, v)| a * (2.0 * PI * v) * (2.0 * PI * c) * g2(v + c, d2(mu, nu)))
            .sum();
        let n = &self.nodes;
        let r: f64 = f
            .radial
            .iter()
            .zip(&n.rho)
            .zip(&n.weight)
            .map(|((&a, &rho), &w)| a * rho * w * 2.0 * PI * c * ring(c, norm(nu), rho))
            .sum();
        g + r
    }
}

/// Radial nodes adequate for a chain of total time `t_total` whose shortest
/// factor has time `t_min`.
pub fn chain_nodes(test: &GaussianTest, t_total: f64, t_min: f64) -> RadialNodes {
    let r_max = test.reach() + 8.0 * (test.var + t_total).sqrt() + 0.5;
    RadialNodes::new(r_max, (3.0 * t_min.sqrt()).min(0.5))
}

/// ⟨M, φ⊗φ⟩ for the measure M whose η part is the operator chain `ops` and
/// whose ξ part is the heat kernel of the summed chain time.
pub fn chain_pairing(ops: &[ChainOp], test: &GaussianTest, nodes: &RadialNodes) -> Result<f64> {
    test.validate()?;
    if ops.is_empty() {
        return Err(Error::Shape("empty operator chain".into()));
    }
    let t_total: f64 = ops.iter().map(ChainOp::time).sum();
    let c = test.var;
    let chain = Chain { nodes };
    let s = FRAC_1_SQRT_2;
    let mut total = 0.0;
    for a in &test.terms {
        for b in &test.terms {
            let alpha = [(a.mx[0] + b.mx[0]) * s, (a.mx[1] + b.mx[1]) * s];
            let beta = [(a.my[0] + b.my[0]) * s, (a.my[1] + b.my[1]) * s];
            let xi = (2.0 * PI * c).powi(2) * g2(t_total + 2.0 * c, d2(alpha, beta));
            let mu = [(a.mx[0] - b.mx[0]) * s, (a.mx[1] - b.mx[1]) * s];
            let nu = [(a.my[0] - b.my[0]) * s, (a.my[1] - b.my[1]) * s];
            let mut f = Field { gauss: vec![(1.0, mu, c)], radial: vec![0.0; nodes.len()] };
            for &op in ops {
                f = chain.apply(op, f);
            }
            total += a.coef * b.coef * xi * chain.close(&f, nu, c);
        }
    }
    Ok(total)
}

/// A kernel table covering the radial nodes, spaced finely enough that
/// interpolation error stays near 1e-5.
fn table(t: f64, theta: DisorderParam, nodes: &RadialNodes) -> Result<KernelGrid> {
    let r_max = nodes.rho.last().copied().unwrap_or(1.0).max(1.0);
    let r_min = 1e-5;
    let n = ((r_max / r_min).ln() / 0.08).ceil() as usize + 1;
    build_kernel_grid(t, theta, &GridSpec::new(r_min, r_max, n)?)
}

/// ⟨Q_t^ϑ, φ⊗φ⟩.
pub fn q_pairing(t: f64, theta: DisorderParam, test: &GaussianTest) -> Result<f64> {
    let nodes = chain_nodes(test, t, t);
    let k = table(t, theta, &nodes)?;
    chain_pairing(&[ChainOp::Semigroup(&k)], test, &nodes)
}

/// ⟨K_t^ϑ, φ⊗φ⟩, the variance of ⟨Z_{s,s+t}, φ⟩.
pub fn k_pairing(t: f64, theta: DisorderParam, test: &GaussianTest) -> Result<f64> {
    let nodes = chain_nodes(test, t, t);
    let k = table(t, theta, &nodes)?;
    chain_pairing(&[ChainOp::Kernel(&k)], test, &nodes)
}

/// ⟨U_t, φ⟩, the mean of ⟨Z_{s,s+t}, φ⟩.
pub fn u_mean_pairing(t: f64, test: &GaussianTest) -> Result<f64> {
    test.validate()?;
    let c = test.var;
    Ok(test.terms.iter().map(|a| a.coef * (2.0 * PI * c).powi(2) * g2(t + 2.0 * c, d2(a.mx, a.my))).sum())
}

/// ⟨U_t ⊗ U_t, φ⊗φ⟩ = ⟨U_t, φ⟩².
pub fn u_pairing(t: f64, test: &GaussianTest) -> Result<f64> {
    Ok(u_mean_pairing(t, test)?.powi(2))
}

fn check_order(times: &[f64]) -> Result<()> {
    if times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Ordering(format!("times must strictly increase: {times:?}")));
    }
    Ok(())
}

/// Second-moment Chapman–Kolmogorov pair for r < s < t < u:
/// lhs = ⟨Q_{u−r} − Q_{s−r} •_{t−s} Q_{u−t}, φ⊗φ⟩ and
/// rhs = ⟨Q_{s−r} • K_{t−s} • Q_{u−t}, φ⊗φ⟩, on one set of radial nodes.
pub fn chapman_defect(
    (r, s, t, u): (f64, f64, f64, f64),
    theta: DisorderParam,
    test: &GaussianTest,
) -> Result<(f64, f64)> {
    check_order(&[r, s, t, u])?;
    let t_min = (s - r).min(t - s).min(u - t);
    let nodes = chain_nodes(test, u - r, t_min);
    let k = |dt: f64| table(dt, theta, &nodes);
    chapman_defect_with(&k(s - r)?, &k(t - s)?, &k(u - t)?, &k(u - r)?, test)
}

/// As [`chapman_defect`] with caller-supplied kernels for the intervals
/// [r,s], [s,t], [t,u] and [r,u].
pub fn chapman_defect_with(
    first: &dyn RadialKernel,
    middle: &dyn RadialKernel,
    last: &dyn RadialKernel,
    whole: &dyn RadialKernel,
    test: &GaussianTest,
) -> Result<(f64, f64)> {
    let gap = middle.time();
    let span = first.time() + gap + last.time();
    if (whole.time() - span).abs() > 1e-12 * span {
        return Err(Error::Shape(format!("whole interval {} differs from {span}", whole.time())));
    }
    let t_min = first.time().min(gap).min(last.time());
    let nodes = chain_nodes(test, span, t_min);
    let direct = chain_pairing(&[ChainOp::Semigroup(whole)], test, &nodes)?;
    let glued = chain_pairing(
        &[ChainOp::Semigroup(first), ChainOp::Heat(gap), ChainOp::Semigroup(last)],
        test,
        &nodes,
    )?;
    let rhs = chain_pairing(
        &[ChainOp::Semigroup(first), ChainOp::Kernel(middle), ChainOp::Semigroup(last)],
        test,
        &nodes,
    )?;
    Ok((direct - glued, rhs))
}
