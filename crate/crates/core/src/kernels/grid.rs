//! Radial tabulation of K_t^ϑ with bicubic interpolation of ln K in log radii.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{DisorderParam, KernelRule, RadialKernel};
use crate::error::{domain, Error, Result};
use crate::io::{read_container, write_container, CODE_VERSION};

pub const GRID_FORMAT_VERSION: u32 = 1;
const KIND: &str = "kernel_grid";

/// Log-spaced radii r_min … r_max with `n` points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_min: f64,
    pub r_max: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn new(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        let s = GridSpec { r_min, r_max, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_min > 0.0 && self.r_max > self.r_min && self.r_max.is_finite()) {
            return Err(domain(format!("need 0 < r_min < r_max, got {} .. {}", self.r_min, self.r_max)));
        }
        if self.n < 4 {
            return Err(domain(format!("grid needs at least 4 radii, got {}", self.n)));
        }
        Ok(())
    }

    pub fn radii(&self) -> Vec<f64> {
        let (a, b) = (self.r_min.ln(), self.r_max.ln());
        (0..self.n).map(|i| (a + (b - a) * i as f64 / (self.n - 1) as f64).exp()).collect()
    }

    /// Same range with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        GridSpec { r_min: self.r_min, r_max: self.r_max, n: (self.n - 1) * factor + 1 }
    }
}

/// Metadata stored in the sidecar of a persisted grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelGridHeader {
    pub t: f64,
    pub theta: f64,
    pub grid: GridSpec,
    pub code_version: String,
    pub grid_format_version: u32,
    pub interp_rel_tol: f64,
    pub kernel_rel_tol: f64,
}

/// Tabulated K_t^ϑ(r_i, r_j).
#[derive(Debug, Clone)]
pub struct KernelGrid {
    pub t: f64,
    pub theta: DisorderParam,
    pub spec: GridSpec,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub interpolation_order: usize,
    ln_values: Vec<f64>,
    u0: f64,
    du: f64,
}

/// Tabulates K on the grid; rows are computed in parallel.
pub fn build_kernel_grid(t: f64, theta: DisorderParam, spec: &GridSpec) -> Result<KernelGrid> {
    spec.validate()?;
    let radii = spec.radii();
    let rule = KernelRule::new(t, theta, spec.r_min)?;
    let n = spec.n;
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..=i).map(|j| rule.k(radii[i], radii[j])).collect())
        .collect();
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    KernelGrid::from_parts(t, theta, spec.clone(), values)
}

impl KernelGrid {
    fn from_parts(t: f64, theta: DisorderParam, spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        let radii = spec.radii();
        if values.len() != spec.n * spec.n {
            return Err(Error::Shape(format!("expected {} values, got {}", spec.n * spec.n, values.len())));
        }
        // interpolate ln K + (x+y)²/2t, which stays smooth in the Gaussian tail
        let n = spec.n;
        let ln_values = (0..n * n)
            .map(|k| {
                let (x, y) = (radii[k / n], radii[k % n]);
                values[k].max(1e-300).ln() + (x + y) * (x + y) / (2.0 * t)
            })
            .collect();
        let u0 = spec.r_min.ln();
        let du = (spec.r_max.ln() - u0) / (spec.n - 1) as f64;
        Ok(KernelGrid { t, theta, spec, radii, values, interpolation_order: 4, ln_values, u0, du })
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.n + j]
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.spec.n;
        (0..n).all(|i| (0..i).all(|j| self.value(i, j) == self.value(j, i)))
    }

    /// Interpolated K at two radii, extrapolated linearly in ln(1/r) below
    /// r_min and by freezing the smooth factor above r_max.
    pub fn k(&self, rx: f64, ry: f64) -> f64 {
        let (r0, r1) = (self.radii[0], self.radii[1]);
        let rmax = self.spec.r_max;
        if rx < r0 {
            let a = self.k(r0, ry);
            let b = self.k(r1, ry);
            return a + (a - b) / (r1 / r0).ln() * (r0 / rx).ln();
        }
        if ry < r0 {
            return self.k(ry, rx);
        }
        if ry > rmax {
            return self.k(ry, rx);
        }
        let ux = rx.min(rmax).ln();
        (self.interp(ux, ry.ln()) - (rx + ry) * (rx + ry) / (2.0 * self.t)).exp()
    }

    fn stencil(&self, u: f64) -> (usize, [f64; 4]) {
        let n = self.spec.n;
        let p = (u - self.u0) / self.du;
        let i0 = (p.floor() as isize - 1).clamp(0, n as isize - 4) as usize;
        let x = p - i0 as f64;
        let mut w = [0.0; 4];
        for (k, wk) in w.iter_mut().enumerate() {
            let mut v = 1.0;
            for m in 0..4 {
                if m != k {
                    v *= (x - m as f64) / (k as f64 - m as f64);
                }
            }
            *wk = v;
        }
        (i0, w)
    }

    fn interp(&self, ux: f64, uy: f64) -> f64 {
        let n = self.spec.n;
        let (ix, wx) = self.stencil(ux);
        let (iy, wy) = self.stencil(uy);
        let mut s = 0.0;
        for a in 0..4 {
            let row = (ix + a) * n + iy;
            let mut r = 0.0;
            for b in 0..4 {
                r += wy[b] * self.ln_values[row + b];
            }
            s += wx[a] * r;
        }
        s
    }

    /// Maximum relative interpolation error at `n_probes` random off-grid
    /// points, measured against direct evaluation.
    pub fn probe_error(&self, n_probes: usize, seed: u64) -> Result<f64> {
        let rule = KernelRule::new(self.t, self.theta, self.spec.r_min)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (self.spec.r_min.ln(), self.spec.r_max.ln());
        // keep to the region where K is not deep in its Gaussian tail
        let b = b.min((6.0 * self.t.sqrt()).ln()).max(a + self.du);
        let pts: Vec<(f64, f64)> =
            (0..n_probes).map(|_| (rng.random_range(a..b).exp(), rng.random_range(a..b).exp())).collect();
        let errs: Vec<f64> = pts
            .par_iter()
            .map(|&(x, y)| {
                let want = rule.k(x, y);
                (self.k(x, y) / want - 1.0).abs()
            })
            .collect();
        Ok(errs.into_iter().fold(0.0, f64::max))
    }

    /// Maximum relative error at the geometric midpoints of grid cells.
    pub fn midpoint_error(&self) -> Result<f64> {
        let rule = KernelRule::new(self.t, self.theta, self.spec.r_min)?;
        let limit = 6.0 * self.t.sqrt();
        let mids: Vec<f64> = self
            .radii
            .windows(2)
            .map(|w| (w[0] * w[1]).sqrt())
            .filter(|&r| r < limit)
            .collect();
        let errs: Vec<f64> = mids
            .par_iter()
            .map(|&x| {
                mids.iter().map(|&y| (self.k(x, y) / rule.k(x, y) - 1.0).abs()).fold(0.0, f64::max)
            })
            .collect();
        Ok(errs.into_iter().fold(0.0, f64::max))
    }

    pub fn header(&self) -> KernelGridHeader {
        KernelGridHeader {
            t: self.t,
            theta: self.theta.theta,
            grid: self.spec.clone(),
            code_version: CODE_VERSION.to_string(),
            grid_format_version: GRID_FORMAT_VERSION,
            interp_rel_tol: 1e-4,
            kernel_rel_tol: 1e-6,
        }
    }

    /// Writes the binary table and its JSON sidecar (`<path>.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_value(self.header()).map_err(|e| Error::Format(e.to_string()))?;
        write_container(path, KIND, json!(header), &self.values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (h, values) = read_container(path, KIND)?;
        let header: KernelGridHeader =
            serde_json::from_value(h).map_err(|e| Error::Format(format!("grid header: {e}")))?;
        if header.grid_format_version != GRID_FORMAT_VERSION {
            return Err(Error::Format(format!("grid format {}", header.grid_format_version)));
        }
        header.grid.validate()?;
        KernelGrid::from_parts(header.t, DisorderParam::new(header.theta), header.grid, values)
    }

    /// CSV with columns radius_x, radius_y, K_value.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "radius_x,radius_y,K_value")?;
        for (i, &x) in self.radii.iter().enumerate() {
            for (j, &y) in self.radii.iter().enumerate() {
                writeln!(w, "{x:e},{y:e},{:e}", self.value(i, j))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

impl RadialKernel for KernelGrid {
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

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> KernelGrid {
        let spec = GridSpec::new(1e-3, 5.0, n).unwrap();
        build_kernel_grid(1.0, DisorderParam::new(0.0), &spec).unwrap()
    }

    #[test]
    fn symmetric_positive_monotone() {
        let g = grid(40);
        assert!(g.is_symmetric());
        let n = g.n();
        for i in 0..n {
            for j in 0..n {
                assert!(g.value(i, j) >= 0.0);
                if i + 1 < n && g.value(i + 1, j) > 1e-250 {
                    assert!(g.value(i + 1, j) < g.value(i, j), "i={i} j={j}");
                }
            }
        }
    }

    #[test]
    fn interpolation_accuracy_and_refinement() {
        let coarse = grid(41);
        let fine = build_kernel_grid(1.0, DisorderParam::new(0.0), &coarse.spec.refined(2)).unwrap();
        let e1 = coarse.midpoint_error().unwrap();
        let e2 = fine.midpoint_error().unwrap();
        assert!(e2 <= 1e-4, "fine {e2}");
        assert!(e1 / e2 >= 4.0, "{e1} {e2}");
        assert!(fine.probe_error(200, 3).unwrap() < 1e-4);
    }

    #[test]
    fn reproduces_nodes_and_extrapolates() {
        let g = grid(40);
        let (i, j) = (7, 21);
        assert!((g.k(g.radii[i], g.radii[j]) / g.value(i, j) - 1.0).abs() < 1e-12);
        let rule = KernelRule::new(1.0, DisorderParam::new(0.0), 1e-6).unwrap();
        let (x, y) = (2e-4, 0.5);
        assert!((g.k(x, y) / rule.k(x, y) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn save_load_csv() {
        let g = grid(12);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.bin");
        g.save(&p).unwrap();
        let back = KernelGrid::load(&p).unwrap();
        assert_eq!(back.values, g.values);
        assert_eq!(back.header(), g.header());
        let c = dir.path().join("k.csv");
        g.write_csv(&c).unwrap();
        let text = std::fs::read_to_string(c).unwrap();
        assert!(text.starts_with("radius_x,radius_y,K_value\n"));
        assert_eq!(text.lines().count(), 1 + 144);
    }
}
