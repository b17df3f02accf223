//! Space-time white noise on a square lattice, mollified by j_ε.
//!
//! Cells of side δx and duration δt carry independent N(0, 1/(δt δx²))
//! values W. At node z of time slice k the field is
//! ξ_k(z) = Σ_m j_ε(m δx) δx² W_k(z + m), so that
//! Cov(ξ_k(z), ξ_k(z + n)) = D(n) = (δx²/δt) Σ_m j_ε(m δx) j_ε((m + n) δx),
//! the lattice version of J_ε(n δx)/δt. Off-node values are bilinear
//! interpolations. Slices are regenerated on demand from (seed, k).

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::stream_rng;

use super::MollifierSpec;

/// Square node lattice {lo + (i, j) δx : 0 ≤ i, j < n} with time step δt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dt: f64,
    pub dx: f64,
    pub lo: [f64; 2],
    pub n: usize,
}

impl LatticeSpec {
    /// The coarsest admissible lattice at ε (δt = ε²/4, δx = ε/4) covering
    /// the square of the given half width around `center`.
    pub fn resolving(eps: f64, center: [f64; 2], half_width: f64) -> Self {
        let dx = eps / 4.0;
        let n = (2.0 * half_width / dx).ceil() as usize + 1;
        let span = (n - 1) as f64 * dx;
        LatticeSpec { dt: eps * eps / 4.0, dx, lo: [center[0] - span / 2.0, center[1] - span / 2.0], n }
    }

    pub fn node(&self, i: usize, j: usize) -> [f64; 2] {
        [self.lo[0] + i as f64 * self.dx, self.lo[1] + j as f64 * self.dx]
    }

    pub fn hi(&self) -> [f64; 2] {
        let span = (self.n - 1) as f64 * self.dx;
        [self.lo[0] + span, self.lo[1] + span]
    }

    /// Nodes and bilinear weights of the cell containing x.
    pub(crate) fn stencil(&self, x: [f64; 2]) -> Result<([usize; 2], [f64; 4])> {
        let u = (x[0] - self.lo[0]) / self.dx;
        let v = (x[1] - self.lo[1]) / self.dx;
        let top = (self.n - 1) as f64;
        if !(u >= 0.0 && v >= 0.0 && u <= top && v <= top) {
            let hi = self.hi();
            return Err(Error::Window(format!(
                "point ({}, {}) outside the noise window [{}, {}] x [{}, {}]",
                x[0], x[1], self.lo[0], hi[0], self.lo[1], hi[1]
            )));
        }
        let i = (u.floor() as usize).min(self.n - 2);
        let j = (v.floor() as usize).min(self.n - 2);
        let (a, b) = (u - i as f64, v - j as f64);
        Ok(([i, j], [(1.0 - a) * (1.0 - b), (1.0 - a) * b, a * (1.0 - b), a * b]))
    }
}

const NOISE_TAG: u64 = 0x6e_6f69_7365;

#[derive(Debug, Clone)]
pub struct NoiseRealization {
    lattice: LatticeSpec,
    eps: f64,
    seed: u64,
    first: i64,
    n_slices: usize,
    margin: usize,
    taps: Vec<(isize, isize, f64)>,
    cov: Vec<f64>,
}

/// Node values of ξ on one time slice, row-major in the first coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSlice {
    pub index: i64,
    pub values: Vec<f64>,
}

fn grid_index(t: f64, dt: f64) -> Result<i64> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
        return Err(domain(format!("time {t} is not a multiple of the step {dt}")));
    }
    Ok(k as i64)
}

/// Noise on the slices covering [s, t]; both ends must be multiples of δt.
pub fn sample_noise(
    interval: (f64, f64),
    eps: f64,
    mollifier: &MollifierSpec,
    lattice: LatticeSpec,
    seed: u64,
) -> Result<NoiseRealization> {
    let (s, t) = interval;
    if !(s < t) {
        return Err(Error::Ordering(format!("noise interval [{s}, {t}] is empty")));
    }
    if !(eps > 0.0) {
        return Err(domain(format!("epsilon must be positive, got {eps}")));
    }
    let tol = 1.0 + 1e-12;
    if !(lattice.dt > 0.0 && lattice.dx > 0.0) || lattice.dt > tol * eps * eps / 4.0 || lattice.dx > tol * eps / 4.0 {
        return Err(domain(format!(
            "lattice (dt = {}, dx = {}) does not resolve epsilon = {eps}: need dt <= eps^2/4, dx <= eps/4",
            lattice.dt, lattice.dx
        )));
    }
    if lattice.n < 2 {
        return Err(domain("noise window needs at least two nodes per side"));
    }
    let first = grid_index(s, lattice.dt)?;
    let last = grid_index(t, lattice.dt)?;
    let margin = (mollifier.rho * eps / lattice.dx).floor() as usize;
    let mut taps = Vec::new();
    let m = margin as isize;
    let area = lattice.dx * lattice.dx;
    for a in -m..=m {
        for b in -m..=m {
            let w = mollifier.j_eps(eps, [a as f64 * lattice.dx, b as f64 * lattice.dx]) * area;
            if w > 0.0 {
                taps.push((a, b, w));
            }
        }
    }
    let side = 4 * margin + 1;
    let mut cov = vec![0.0; side * side];
    let scale = 1.0 / (lattice.dt * area);
    for &(a, b, w) in &taps {
        for &(c, d, v) in &taps {
            let (p, q) = ((c - a + 2 * m) as usize, (d - b + 2 * m) as usize);
            cov[p * side + q] += w * v * scale;
        }
    }
    Ok(NoiseRealization { lattice, eps, seed, first, n_slices: (last - first) as usize, margin, taps, cov })
}

impl NoiseRealization {
    pub fn lattice(&self) -> &LatticeSpec {
        &self.lattice
    }

    pub fn epsilon(&self) -> f64 {
        self.eps
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dt(&self) -> f64 {
        self.lattice.dt
    }

    /// Global index of the first slice (s/δt).
    pub fn first_slice(&self) -> i64 {
        self.first
    }

    pub fn n_slices(&self) -> usize {
        self.n_slices
    }

    pub fn interval(&self) -> (f64, f64) {
        let dt = self.lattice.dt;
        (self.first as f64 * dt, (self.first + self.n_slices as i64) as f64 * dt)
    }

    /// Discrete covariance D(n) between nodes n lattice steps apart.
    pub fn covariance(&self, n: [i64; 2]) -> f64 {
        let m = 2 * self.margin as i64;
        if n[0].abs() > m || n[1].abs() > m {
            return 0.0;
        }
        let side = (2 * m + 1) as usize;
        self.cov[(n[0] + m) as usize * side + (n[1] + m) as usize]
    }

    /// Covariance of the interpolated field at x and y on one slice.
    pub fn point_covariance(&self, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
        let (cx, bx) = self.lattice.stencil(x)?;
        let (cy, by) = self.lattice.stencil(y)?;
        let corner = [[0, 0], [0, 1], [1, 0], [1, 1]];
        let mut acc = 0.0;
        for (p, wp) in corner.iter().zip(bx) {
            for (q, wq) in corner.iter().zip(by) {
                let n = [
                    (cy[0] + q[0]) as i64 - (cx[0] + p[0]) as i64,
                    (cy[1] + q[1]) as i64 - (cx[1] + p[1]) as i64,
                ];
                acc += wp * wq * self.covariance(n);
            }
        }
        Ok(acc)
    }

    /// Variance of the interpolated field at x, Σ bₙ bₘ D(n − m).
    pub fn point_variance(&self, x: [f64; 2]) -> Result<f64> {
        self.point_covariance(x, x)
    }

    /// Unit-variance cell normals of slice k, (n + 2·margin)² values.
    fn cell_normals(&self, k: i64) -> Vec<f64> {
        let side = self.lattice.n + 2 * self.margin;
        let mut rng = stream_rng(self.seed, NOISE_TAG, k as u64);
        (0..side * side).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    /// The slice with global index k.
    pub fn slice(&self, k: i64) -> Result<NoiseSlice> {
        if k < self.first || k >= self.first + self.n_slices as i64 {
            return Err(domain(format!("slice {k} outside this realization")));
        }
        let w = self.cell_normals(k);
        let n = self.lattice.n;
        let side = n + 2 * self.margin;
        let m = self.margin as isize;
        let scale = 1.0 / (self.lattice.dt * self.lattice.dx * self.lattice.dx).sqrt();
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                for &(a, b, t) in &self.taps {
                    let p = (i as isize + a + m) as usize;
                    let q = (j as isize + b + m) as usize;
                    acc += t * w[p * side + q];
                }
                *out = acc * scale;
            }
        });
        Ok(NoiseSlice { index: k, values })
    }

    /// ξ at an arbitrary point of the window.
    pub fn value(&self, slice: &NoiseSlice, x: [f64; 2]) -> Result<f64> {
        let ([i, j], b) = self.lattice.stencil(x)?;
        let n = self.lattice.n;
        let v = &slice.values;
        Ok(b[0] * v[i * n + j] + b[1] * v[i * n + j + 1] + b[2] * v[(i + 1) * n + j] + b[3] * v[(i + 1) * n + j + 1])
    }

    /// Coefficient of each unit cell normal in Σ_k cₖ ξ(x_k) on one slice,
    /// for the listed (point, coefficient) pairs; keyed by cell index.
    #[cfg(test)]
    pub(crate) fn cell_coefficients(&self, points: &[([f64; 2], f64)]) -> Result<Vec<(usize, f64)>> {
        let n = self.lattice.n;
        let side = n + 2 * self.margin;
        let m = self.margin as isize;
        let scale = 1.0 / (self.lattice.dt * self.lattice.dx * self.lattice.dx).sqrt();
        let mut acc = std::collections::BTreeMap::new();
        for &(x, c) in points {
            let ([i, j], b) = self.lattice.stencil(x)?;
            for (corner, w) in [[0, 0], [0, 1], [1, 0], [1, 1]].iter().zip(b) {
                for &(a, bb, t) in &self.taps {
                    let p = ((i + corner[0]) as isize + a + m) as usize;
                    let q = ((j + corner[1]) as isize + bb + m) as usize;
                    *acc.entry(p * side + q).or_insert(0.0) += c * w * t * scale;
                }
            }
        }
        Ok(acc.into_iter().collect())
    }
}
