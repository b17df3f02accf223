//! Densities of the moment measures U_P, Q_P^ϑ and K_P^ϑ over a partition.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{DisorderParam, KernelRule, RadialKernel};
use crate::specfun::g2;

/// Strictly increasing times t₀ < t₁ < … < t_m with m ≥ 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    times: Vec<f64>,
}

impl Partition {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Ordering(format!("a partition needs at least two times, got {}", times.len())));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Ordering(format!("partition times must strictly increase: {times:?}")));
        }
        Ok(Partition { times })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of intervals m.
    pub fn m(&self) -> usize {
        self.times.len() - 1
    }

    pub fn increments(&self) -> Vec<f64> {
        self.times.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MomentKind {
    U,
    Q,
    K,
}

/// Evaluates U̇_P(x₀,…,x_m), or Q̇_P, K_P at (x₀,x₀′; …; x_m,x_m′) given as
/// the flat list [x₀, x₀′, x₁, x₁′, …].
#[derive(Clone)]
pub struct MomentDensity {
    partition: Partition,
    theta: Option<DisorderParam>,
    kind: MomentKind,
    kernels: Vec<Arc<dyn RadialKernel + Send>>,
}

impl std::fmt::Debug for MomentDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MomentDensity")
            .field("partition", &self.partition)
            .field("theta", &self.theta)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Radius below which the default kernel rules are no longer resolved.
const DEFAULT_R_MIN: f64 = 1e-6;

fn rules(p: &Partition, theta: DisorderParam) -> Result<Vec<Arc<dyn RadialKernel + Send>>> {
    p.increments()
        .into_iter()
        .map(|dt| Ok(Arc::new(KernelRule::new(dt, theta, DEFAULT_R_MIN)?) as Arc<dyn RadialKernel + Send>))
        .collect()
}

pub fn u_density(p: &Partition) -> MomentDensity {
    MomentDensity { partition: p.clone(), theta: None, kind: MomentKind::U, kernels: Vec::new() }
}

pub fn q_density(p: &Partition, theta: DisorderParam) -> Result<MomentDensity> {
    Ok(MomentDensity { partition: p.clone(), theta: Some(theta), kind: MomentKind::Q, kernels: rules(p, theta)? })
}

pub fn k_density(p: &Partition, theta: DisorderParam) -> Result<MomentDensity> {
    Ok(MomentDensity { partition: p.clone(), theta: Some(theta), kind: MomentKind::K, kernels: rules(p, theta)? })
}

/// Q or K density using caller-supplied kernels (for instance cached
/// tables), one per interval of the partition.
pub fn moment_density_with(
    p: &Partition,
    kind: MomentKind,
    kernels: Vec<Arc<dyn RadialKernel + Send>>,
) -> Result<MomentDensity> {
    if kind == MomentKind::U {
        return Ok(u_density(p));
    }
    if kernels.len() != p.m() {
        return Err(Error::Shape(format!("{} kernels for {} intervals", kernels.len(), p.m())));
    }
    let theta = kernels[0].theta();
    for (k, dt) in kernels.iter().zip(p.increments()) {
        if (k.time() - dt).abs() > 1e-12 * dt || k.theta() != theta {
            return Err(Error::Shape(format!("kernel at t = {} does not match interval {dt}", k.time())));
        }
    }
    Ok(MomentDensity { partition: p.clone(), theta: Some(theta), kind, kernels })
}

fn sum_diff(a: [f64; 2], b: [f64; 2]) -> ([f64; 2], [f64; 2]) {
    let s = FRAC_1_SQRT_2;
    ([(a[0] + b[0]) * s, (a[1] + b[1]) * s], [(a[0] - b[0]) * s, (a[1] - b[1]) * s])
}

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn radius(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

impl MomentDensity {
    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn kind(&self) -> MomentKind {
        self.kind
    }

    pub fn theta(&self) -> Option<DisorderParam> {
        self.theta
    }

    /// Number of R² points expected by [`Self::eval`].
    pub fn n_points(&self) -> usize {
        match self.kind {
            MomentKind::U => self.partition.m() + 1,
            _ => 2 * (self.partition.m() + 1),
        }
    }

    fn u_chain<I: Iterator<Item = [f64; 2]> + Clone>(&self, pts: I) -> f64 {
        let dts = self.partition.increments();
        let a = pts.clone();
        let b = pts.skip(1);
        a.zip(b).zip(dts).map(|((x, y), dt)| g2(dt, d2(x, y))).product()
    }

    /// Density value; may be +∞ where a difference coordinate vanishes.
    pub fn eval(&self, pts: &[[f64; 2]]) -> Result<f64> {
        if pts.len() != self.n_points() {
            return Err(Error::Shape(format!("expected {} points, got {}", self.n_points(), pts.len())));
        }
        if self.kind == MomentKind::U {
            return Ok(self.u_chain(pts.iter().copied()));
        }
        let dts = self.partition.increments();
        let rot: Vec<_> = pts.chunks(2).map(|c| sum_diff(c[0], c[1])).collect();
        let mut q = 1.0;
        for (j, dt) in dts.iter().enumerate() {
            let (s0, e0) = rot[j];
            let (s1, e1) = rot[j + 1];
            let (r0, r1) = (radius(e0), radius(e1));
            let k = if r0 == 0.0 || r1 == 0.0 { f64::INFINITY } else { self.kernels[j].k_radial(r0, r1) };
            q *= g2(*dt, d2(s0, s1)) * (g2(*dt, d2(e0, e1)) + k);
        }
        if self.kind == MomentKind::Q {
            return Ok(q);
        }
        let u1 = self.u_chain(pts.iter().step_by(2).copied());
        let u2 = self.u_chain(pts.iter().skip(1).step_by(2).copied());
        Ok(q - u1 * u2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_validation() {
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.0]).is_err());
        assert!(Partition::new(vec![0.0, 1.0, 0.5]).is_err());
        let p = Partition::new(vec![0.0, 0.25, 1.0]).unwrap();
        assert_eq!(p.m(), 2);
        assert_eq!(p.increments(), vec![0.25, 0.75]);
    }

    #[test]
    fn u_single_interval_is_heat_kernel() {
        let p = Partition::new(vec![0.5, 1.25]).unwrap();
        let u = u_density(&p);
        let (x, y) = ([0.3, -0.2], [1.0, 0.4]);
        assert_eq!(u.eval(&[x, y]).unwrap(), g2(0.75, d2(x, y)));
        assert!(u.eval(&[x]).is_err());
    }

    #[test]
    fn q_single_interval_matches_rotated_form() {
        let p = Partition::new(vec![0.0, 0.6]).unwrap();
        let th = DisorderParam::new(0.3);
        let q = q_density(&p, th).unwrap();
        let (x, xp, y, yp) = ([0.4, 0.1], [-0.3, 0.2], [0.5, -0.5], [0.1, 0.7]);
        let (sx, dx) = sum_diff(x, xp);
        let (sy, dy) = sum_diff(y, yp);
        let p_val = crate::kernels::p_kernel(0.6, th, dx, dy).unwrap();
        let want = g2(0.6, d2(sx, sy)) * p_val;
        let got = q.eval(&[x, xp, y, yp]).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{got} {want}");
        let k = k_density(&p, th).unwrap().eval(&[x, xp, y, yp]).unwrap();
        let uu = g2(0.6, d2(x, y)) * g2(0.6, d2(xp, yp));
        assert!((k - (got - uu)).abs() < 1e-14 * got);
        assert!(k > 0.0);
    }

    #[test]
    fn q_diagonal_is_infinite() {
        let p = Partition::new(vec![0.0, 1.0]).unwrap();
        let q = q_density(&p, DisorderParam::new(0.0)).unwrap();
        let v = q.eval(&[[0.2, 0.1], [0.2, 0.1], [0.0, 0.3], [0.5, 0.3]]).unwrap();
        assert!(v.is_infinite());
    }

    #[test]
    fn translation_invariance() {
        let p = Partition::new(vec![0.0, 0.3, 1.0]).unwrap();
        let u = u_density(&p);
        let pts = [[0.1, 0.2], [0.5, -0.4], [-0.3, 0.9]];
        let shift = [2.5, -1.5];
        let moved: Vec<_> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        let (a, b) = (u.eval(&pts).unwrap(), u.eval(&moved).unwrap());
        assert!((a - b).abs() <= 1e-14 * a);
        let q = q_density(&p, DisorderParam::new(-0.5)).unwrap();
        let pts = [[0.1, 0.2], [0.4, 0.0], [0.5, -0.4], [0.2, 0.1], [-0.3, 0.9], [0.0, 0.5]];
        let moved: Vec<_> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
        let (a, b) = (q.eval(&pts).unwrap(), q.eval(&moved).unwrap());
        assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn kernels_must_match_intervals() {
        let p = Partition::new(vec![0.0, 0.5, 1.0]).unwrap();
        let th = DisorderParam::new(0.0);
        let k: Arc<dyn RadialKernel + Send> = Arc::new(KernelRule::new(0.5, th, 1e-3).unwrap());
        assert!(moment_density_with(&p, MomentKind::Q, vec![k.clone(), k.clone()]).is_ok());
        let wrong: Arc<dyn RadialKernel + Send> = Arc::new(KernelRule::new(0.4, th, 1e-3).unwrap());
        assert!(moment_density_with(&p, MomentKind::Q, vec![k, wrong]).is_err());
    }
}
