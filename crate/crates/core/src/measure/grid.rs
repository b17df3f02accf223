//! Measures on (R²)^k discretized as masses on square cells.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::io::{read_container, write_container};

const KIND: &str = "grid_measure";

/// A square grid of n × n cells of side h; cell i along an axis has centre
/// lo + (i + ½)h.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotGrid {
    pub n: usize,
    pub h: f64,
    pub lo: f64,
}

impl SlotGrid {
    pub fn new(n: usize, h: f64, lo: f64) -> Result<Self> {
        let g = SlotGrid { n, h, lo };
        g.validate()?;
        Ok(g)
    }

    /// n × n cells covering [−half_width, half_width]².
    pub fn centered(n: usize, half_width: f64) -> Result<Self> {
        SlotGrid::new(n, 2.0 * half_width / n as f64, -half_width)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || !(self.h > 0.0) || !self.h.is_finite() || !self.lo.is_finite() {
            return Err(Error::Shape(format!("invalid slot grid {self:?}")));
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.n * self.n
    }

    pub fn area(&self) -> f64 {
        self.h * self.h
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.lo + (i as f64 + 0.5) * self.h
    }

    /// Centre of cell `c` = i₀·n + i₁.
    pub fn center(&self, c: usize) -> [f64; 2] {
        [self.coord(c / self.n), self.coord(c % self.n)]
    }

    /// The cell containing `p`, if any.
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        let idx = |v: f64| {
            let u = ((v - self.lo) / self.h).floor();
            (u >= 0.0 && u < self.n as f64).then_some(u as usize)
        };
        Some(idx(p[0])? * self.n + idx(p[1])?)
    }

    /// Half width of the covered window about its centre.
    pub fn half_width(&self) -> f64 {
        0.5 * self.n as f64 * self.h
    }
}

/// Nonnegative masses on the product of k slot grids. Slot 0 is the slowest
/// index of `weights`. A slot with `density` set represents a measure with a
/// Lebesgue density in that coordinate (mass = density × cell area).
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeasure {
    slots: Vec<SlotGrid>,
    density: Vec<bool>,
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct MeasureHeader {
    slots: Vec<SlotGrid>,
    density: Vec<bool>,
}

fn cell_count(slots: &[SlotGrid]) -> usize {
    slots.iter().map(SlotGrid::cells).product()
}

impl GridMeasure {
    pub fn new(slots: Vec<SlotGrid>, density: Vec<bool>, weights: Vec<f64>) -> Result<Self> {
        for s in &slots {
            s.validate()?;
        }
        if density.len() != slots.len() {
            return Err(Error::Shape(format!(
                "{} density flags for {} slots",
                density.len(),
                slots.len()
            )));
        }
        if weights.len() != cell_count(&slots) {
            return Err(Error::Shape(format!(
                "{} weights for {} cells",
                weights.len(),
                cell_count(&slots)
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain(format!("weights must be finite and nonnegative, found {w}")));
        }
        Ok(GridMeasure { slots, density, weights })
    }

    /// Midpoint discretization of a density f on (R²)^k; every slot is
    /// flagged as carrying a density.
    pub fn from_density<F>(slots: Vec<SlotGrid>, f: F) -> Result<Self>
    where
        F: Fn(&[[f64; 2]]) -> f64 + Sync,
    {
        for s in &slots {
            s.validate()?;
        }
        let area: f64 = slots.iter().map(SlotGrid::area).product();
        let weights: Vec<f64> = (0..cell_count(&slots))
            .into_par_iter()
            .map(|idx| {
                let pts = Self::centers_of(&slots, idx);
                f(&pts) * area
            })
            .collect();
        let k = slots.len();
        GridMeasure::new(slots, vec![true; k], weights)
    }

    /// Unit masses at the cells containing each point.
    pub fn point_mass(slots: Vec<SlotGrid>, points: &[[f64; 2]], mass: f64) -> Result<Self> {
        if points.len() != slots.len() {
            return Err(Error::Shape(format!("{} points for {} slots", points.len(), slots.len())));
        }
        let mut idx = 0;
        for (s, &p) in slots.iter().zip(points) {
            let c = s
                .locate(p)
                .ok_or_else(|| Error::Window(format!("point {p:?} outside slot grid")))?;
            idx = idx * s.cells() + c;
        }
        let mut weights = vec![0.0; cell_count(&slots)];
        weights[idx] = mass;
        let k = slots.len();
        GridMeasure::new(slots, vec![false; k], weights)
    }

    fn centers_of(slots: &[SlotGrid], mut idx: usize) -> Vec<[f64; 2]> {
        let mut pts = vec![[0.0; 2]; slots.len()];
        for (p, s) in pts.iter_mut().zip(slots).rev() {
            *p = s.center(idx % s.cells());
            idx /= s.cells();
        }
        pts
    }

    pub fn arity(&self) -> usize {
        self.slots.len()
    }

    pub fn slots(&self) -> &[SlotGrid] {
        &self.slots
    }

    pub fn density_flags(&self) -> &[bool] {
        &self.density
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Cell centres for a flat weight index.
    pub fn centers(&self, idx: usize) -> Vec<[f64; 2]> {
        Self::centers_of(&self.slots, idx)
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Midpoint pairing Σ w·f(centres).
    pub fn pairing<F>(&self, f: F) -> f64
    where
        F: Fn(&[[f64; 2]]) -> f64 + Sync,
    {
        let parts: Vec<f64> = self
            .weights
            .par_iter()
            .enumerate()
            .map(|(i, &w)| if w == 0.0 { 0.0 } else { w * f(&self.centers(i)) })
            .collect();
        parts.iter().sum()
    }

    /// Marginal on the listed slots, which must be strictly increasing.
    pub fn project(&self, kept: &[usize]) -> Result<GridMeasure> {
        if kept.windows(2).any(|w| w[0] >= w[1]) || kept.iter().any(|&k| k >= self.arity()) {
            return Err(Error::Shape(format!("invalid slot list {kept:?} for arity {}", self.arity())));
        }
        let slots: Vec<SlotGrid> = kept.iter().map(|&k| self.slots[k]).collect();
        let density = kept.iter().map(|&k| self.density[k]).collect();
        let mut weights = vec![0.0; cell_count(&slots)];
        let sizes: Vec<usize> = self.slots.iter().map(SlotGrid::cells).collect();
        let mut digits = vec![0usize; self.arity()];
        for &w in &self.weights {
            let mut out = 0;
            for &k in kept {
                out = out * sizes[k] + digits[k];
            }
            weights[out] += w;
            for d in (0..digits.len()).rev() {
                digits[d] += 1;
                if digits[d] < sizes[d] {
                    break;
                }
                digits[d] = 0;
            }
        }
        GridMeasure::new(slots, density, weights)
    }

    fn check_glue(&self, other: &GridMeasure) -> Result<()> {
        if self.arity() == 0 || other.arity() == 0 {
            return Err(Error::Shape("gluing needs at least one slot on each side".into()));
        }
        Ok(())
    }

    /// μ₁ •_ς μ₂: glue the last slot of `self` to the first slot of `other`
    /// through g_ς(a − b).
    pub fn bullet_sigma(&self, other: &GridMeasure, sigma: f64) -> Result<GridMeasure> {
        self.check_glue(other)?;
        check_sigma(sigma)?;
        let a = *self.slots.last().unwrap();
        let b = other.slots[0];
        let smoothed = smooth_trailing(&self.weights, a, b, sigma);
        let rows = self.weights.len() / a.cells();
        let cols = other.weights.len() / b.cells();
        let weights = matmul(&smoothed, &other.weights, rows, b.cells(), cols);
        self.glued(other, weights)
    }

    /// μ₁ ∘_ς μ₂: as [`Self::bullet_sigma`] but keeping the glue coordinate a
    /// as a slot between the two.
    pub fn circ_sigma(&self, other: &GridMeasure, sigma: f64) -> Result<GridMeasure> {
        self.check_glue(other)?;
        check_sigma(sigma)?;
        let a = *self.slots.last().unwrap();
        let b = other.slots[0];
        let s = smooth_leading(&other.weights, b, a, sigma);
        let cols = other.weights.len() / b.cells();
        let ac = a.cells();
        let mut weights = vec![0.0; self.weights.len() * cols];
        weights
            .par_chunks_mut(ac * cols)
            .zip(self.weights.par_chunks(ac))
            .for_each(|(out, w1)| {
                for (ia, &wa) in w1.iter().enumerate() {
                    let row = &s[ia * cols..(ia + 1) * cols];
                    for (o, &v) in out[ia * cols..(ia + 1) * cols].iter_mut().zip(row) {
                        *o = wa * v;
                    }
                }
            });
        let mut slots = self.slots.clone();
        slots.extend_from_slice(&other.slots[1..]);
        let mut density = self.density.clone();
        density.extend_from_slice(&other.density[1..]);
        GridMeasure::new(slots, density, weights)
    }

    /// μ₁ •_ς: the last slot replaced by its Gaussian-smoothed density on the
    /// same grid.
    pub fn smooth_last(&self, sigma: f64) -> Result<GridMeasure> {
        if self.arity() == 0 {
            return Err(Error::Shape("no slot to smooth".into()));
        }
        check_sigma(sigma)?;
        let a = *self.slots.last().unwrap();
        let mut weights = smooth_trailing(&self.weights, a, a, sigma);
        weights.iter_mut().for_each(|w| *w *= a.area());
        let mut density = self.density.clone();
        *density.last_mut().unwrap() = true;
        GridMeasure::new(self.slots.clone(), density, weights)
    }

    /// •_ς μ₂: the first slot replaced by its Gaussian-smoothed density.
    pub fn smooth_first(&self, sigma: f64) -> Result<GridMeasure> {
        if self.arity() == 0 {
            return Err(Error::Shape("no slot to smooth".into()));
        }
        check_sigma(sigma)?;
        let b = self.slots[0];
        let mut weights = smooth_leading(&self.weights, b, b, sigma);
        weights.iter_mut().for_each(|w| *w *= b.area());
        let mut density = self.density.clone();
        density[0] = true;
        GridMeasure::new(self.slots.clone(), density, weights)
    }

    /// μ₁ • μ₂ without smoothing. Either the first slot of `other` or the last
    /// slot of `self` must carry a density, and the two glue grids must agree.
    pub fn bullet_density(&self, other: &GridMeasure) -> Result<GridMeasure> {
        self.check_glue(other)?;
        if !other.density[0] && !*self.density.last().unwrap() {
            return Err(Error::Domain("neither glue slot carries a density".into()));
        }
        let a = *self.slots.last().unwrap();
        if a != other.slots[0] {
            return Err(Error::Shape(format!("glue grids differ: {a:?} vs {:?}", other.slots[0])));
        }
        let inv = 1.0 / a.area();
        let rows = self.weights.len() / a.cells();
        let cols = other.weights.len() / a.cells();
        let mut weights = matmul(&self.weights, &other.weights, rows, a.cells(), cols);
        weights.iter_mut().for_each(|w| *w *= inv);
        self.glued(other, weights)
    }

    fn glued(&self, other: &GridMeasure, weights: Vec<f64>) -> Result<GridMeasure> {
        let k1 = self.arity() - 1;
        let mut slots = self.slots[..k1].to_vec();
        slots.extend_from_slice(&other.slots[1..]);
        let mut density = self.density[..k1].to_vec();
        density.extend_from_slice(&other.density[1..]);
        GridMeasure::new(slots, density, weights)
    }

    /// CSV rows of slot coordinates and weight: s0_x,s0_y,s1_x,...,weight.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        let mut head: Vec<String> = (0..self.arity())
            .flat_map(|k| [format!("s{k}_x"), format!("s{k}_y")])
            .collect();
        head.push("weight".into());
        writeln!(w, "{}", head.join(","))?;
        for (i, &m) in self.weights.iter().enumerate() {
            for p in self.centers(i) {
                write!(w, "{:e},{:e},", p[0], p[1])?;
            }
            writeln!(w, "{m:e}")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a CSV written by [`Self::write_csv`] back onto the given slots.
    pub fn read_csv(path: &Path, slots: Vec<SlotGrid>, density: Vec<bool>) -> Result<GridMeasure> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
        let mut weights = vec![0.0; cell_count(&slots)];
        let k = slots.len();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
            if rec.len() != 2 * k + 1 {
                return Err(Error::Format(format!("row has {} fields, expected {}", rec.len(), 2 * k + 1)));
            }
            let num = |j: usize| -> Result<f64> {
                rec[j].trim().parse::<f64>().map_err(|e| Error::Format(format!("field {j}: {e}")))
            };
            let mut idx = 0;
            for (s, slot) in slots.iter().enumerate() {
                let c = slot
                    .locate([num(2 * s)?, num(2 * s + 1)?])
                    .ok_or_else(|| Error::Format("row outside slot grid".into()))?;
                idx = idx * slot.cells() + c;
            }
            weights[idx] += num(2 * k)?;
        }
        GridMeasure::new(slots, density, weights)
    }

    /// Binary container plus JSON sidecar, shared with kernel tables.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = MeasureHeader { slots: self.slots.clone(), density: self.density.clone() };
        let h = serde_json::to_value(header).map_err(|e| Error::Format(e.to_string()))?;
        write_container(path, KIND, json!(h), &self.weights)
    }

    pub fn load(path: &Path) -> Result<GridMeasure> {
        let (h, weights) = read_container(path, KIND)?;
        let header: MeasureHeader =
            serde_json::from_value(h).map_err(|e| Error::Format(format!("measure header: {e}")))?;
        GridMeasure::new(header.slots, header.density, weights)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(())
}

/// 1D Gaussian matrix m[i·n_out + o] = g_ς(a_i − b_o).
fn gauss_matrix(from: SlotGrid, to: SlotGrid, sigma: f64) -> Vec<f64> {
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma).sqrt();
    let mut m = Vec::with_capacity(from.n * to.n);
    for i in 0..from.n {
        let a = from.coord(i);
        for o in 0..to.n {
            let d = a - to.coord(o);
            m.push(norm * (-d * d / (2.0 * sigma)).exp());
        }
    }
    m
}

/// out[p, o, k] = Σ_i w[p, i, k] m[i, o].
fn contract(w: &[f64], n_in: usize, inner: usize, m: &[f64], n_out: usize) -> Vec<f64> {
    let outer = w.len() / (n_in * inner);
    let mut out = vec![0.0; outer * n_out * inner];
    out.par_chunks_mut(n_out * inner)
        .zip(w.par_chunks(n_in * inner))
        .for_each(|(dst, src)| {
            for i in 0..n_in {
                let s = &src[i * inner..(i + 1) * inner];
                for o in 0..n_out {
                    let c = m[i * n_out + o];
                    if c == 0.0 {
                        continue;
                    }
                    for (d, &v) in dst[o * inner..(o + 1) * inner].iter_mut().zip(s) {
                        *d += c * v;
                    }
                }
            }
        });
    out
}

/// Σ_a w[x, a] g_ς(a − b) for the trailing slot, returned on grid `to`.
fn smooth_trailing(w: &[f64], from: SlotGrid, to: SlotGrid, sigma: f64) -> Vec<f64> {
    let m = gauss_matrix(from, to, sigma);
    let t = contract(w, from.n, 1, &m, to.n);
    contract(&t, from.n, to.n, &m, to.n)
}

/// Σ_b g_ς(a − b) w[b, x′] for the leading slot, returned on grid `to`.
fn smooth_leading(w: &[f64], from: SlotGrid, to: SlotGrid, sigma: f64) -> Vec<f64> {
    let m = gauss_matrix(from, to, sigma);
    let rest = w.len() / from.cells();
    let t = contract(w, from.n, rest, &m, to.n);
    contract(&t, from.n, to.n * rest, &m, to.n)
}

/// (rows × mid)·(mid × cols), row-parallel with a fixed summation order.
fn matmul(a: &[f64], b: &[f64], rows: usize, mid: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    out.par_chunks_mut(cols.max(1)).zip(a.par_chunks(mid)).for_each(|(dst, ar)| {
        for (k, &v) in ar.iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            for (d, &bv) in dst.iter_mut().zip(&b[k * cols..(k + 1) * cols]) {
                *d += v * bv;
            }
        }
    });
    out
}
