//! Feynman–Kac pairings summed exactly over lattice paths.
//!
//! With κ the discrete Gaussian of variance δt on the node lattice and
//! wₖ(z) = exp(√V ξₖ(z) δt − ½ V δt² D(0)), the backward recursion
//! uₖ = wₖ·(κ ⋆ uₖ₊₁), u_N = h gives ⟨Z, f⊗h⟩ = Σ_z f(z) u₀(z) δx².
//! The pairing is a deterministic function of the noise, so only the noise
//! has to be sampled. Mass leaving the window is dropped.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::measure::GaussianTest;

use super::fk::check_coupling;
use crate::rng::{mix, stream_rng};
use super::{sample_noise, CouplingSchedule, LatticeSpec, MollifierSpec, NoiseRealization, NoiseSlice};

const BOOT_TAG: u64 = 0x626f_6f74;

/// Normalized discrete Gaussian of variance ≈ δt, truncated at 9 sd.
fn heat_taps(dt: f64, dx: f64) -> Vec<f64> {
    let k = (9.0 * dt.sqrt() / dx).ceil() as i64;
    let mut w: Vec<f64> = (-k..=k).map(|i| (-(i as f64 * dx).powi(2) / (2.0 * dt)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

fn convolve_rows(u: &[f64], out: &mut [f64], n: usize, taps: &[f64]) {
    let k = (taps.len() / 2) as isize;
    out.par_chunks_mut(n).zip(u.par_chunks(n)).for_each(|(o, row)| {
        for (j, x) in o.iter_mut().enumerate() {
            let lo = (j as isize - k).max(0) as usize;
            let hi = (j as isize + k).min(n as isize - 1) as usize;
            let mut acc = 0.0;
            for q in lo..=hi {
                acc += taps[(q as isize - j as isize + k) as usize] * row[q];
            }
            *x = acc;
        }
    });
}

fn transpose(u: &[f64], out: &mut [f64], n: usize) {
    out.par_chunks_mut(n).enumerate().for_each(|(i, o)| {
        for (j, x) in o.iter_mut().enumerate() {
            *x = u[j * n + i];
        }
    });
}

/// One heat step κ ⋆ u on the n×n lattice, one axis at a time.
fn heat_step(u: &mut [f64], scratch: &mut [f64], n: usize, taps: &[f64]) {
    convolve_rows(u, scratch, n, taps);
    transpose(scratch, u, n);
    convolve_rows(u, scratch, n, taps);
    transpose(scratch, u, n);
}

/// A stretch of the backward recursion: noise slices of a realization, or
/// pure heat steps.
#[derive(Clone, Copy)]
pub enum Segment<'a> {
    Noise { noise: &'a NoiseRealization, first: i64, count: usize },
    Heat { steps: usize },
}

/// ⟨Z, φ⟩ for the product of segments (earliest first) on a common lattice.
pub fn lattice_pairing_segments(
    test: &GaussianTest,
    v: f64,
    lattice: &LatticeSpec,
    segments: &[Segment],
) -> Result<f64> {
    backward(test, v, lattice, segments, &mut |_| {})
}

fn gaussian_on(lattice: &LatticeSpec, c: f64, m: [f64; 2]) -> Vec<f64> {
    let n = lattice.n;
    (0..n * n)
        .map(|p| {
            let z = lattice.node(p / n, p % n);
            (-((z[0] - m[0]).powi(2) + (z[1] - m[1]).powi(2)) / (2.0 * c)).exp()
        })
        .collect()
}

fn backward(
    test: &GaussianTest,
    v: f64,
    lattice: &LatticeSpec,
    segments: &[Segment],
    on_slice: &mut dyn FnMut(&NoiseSlice),
) -> Result<f64> {
    test.validate()?;
    let n = lattice.n;
    let taps = heat_taps(lattice.dt, lattice.dx);
    let c = test.var;
    let gauss = |z: [f64; 2], m: [f64; 2]| (-((z[0] - m[0]).powi(2) + (z[1] - m[1]).powi(2)) / (2.0 * c)).exp();
    let mut us: Vec<Vec<f64>> = test
        .terms
        .iter()
        .map(|t| (0..n * n).map(|p| gauss(lattice.node(p / n, p % n), t.my)).collect())
        .collect();
    let mut scratch = vec![0.0; n * n];
    let sv = v.sqrt();
    for seg in segments.iter().rev() {
        match *seg {
            Segment::Heat { steps } => {
                for _ in 0..steps {
                    for u in us.iter_mut() {
                        heat_step(u, &mut scratch, n, &taps);
                    }
                }
            }
            Segment::Noise { noise, first, count } => {
                if noise.lattice() != lattice {
                    return Err(Error::Shape("segment noise lives on a different lattice".into()));
                }
                let dt = lattice.dt;
                let comp = 0.5 * v * dt * dt * noise.covariance([0, 0]);
                for k in (0..count as i64).rev() {
                    let slice = noise.slice(first + k)?;
                    on_slice(&slice);
                    let w: Vec<f64> = slice.values.par_iter().map(|&x| (sv * x * dt - comp).exp()).collect();
                    for u in us.iter_mut() {
                        heat_step(u, &mut scratch, n, &taps);
                        u.par_iter_mut().zip(&w).for_each(|(a, b)| *a *= b);
                    }
                }
            }
        }
    }
    let area = lattice.dx * lattice.dx;
    let mut total = 0.0;
    for (t, u) in test.terms.iter().zip(&us) {
        let s: f64 = u.iter().enumerate().map(|(p, x)| x * gauss(lattice.node(p / n, p % n), t.mx)).sum();
        total += t.coef * s * area;
    }
    Ok(total)
}

/// ⟨Z_{s,t}, φ⟩ over the whole realization.
pub fn lattice_pairing(test: &GaussianTest, coupling: &CouplingSchedule, noise: &NoiseRealization) -> Result<f64> {
    check_coupling(coupling, noise)?;
    let seg = Segment::Noise { noise, first: noise.first_slice(), count: noise.n_slices() };
    lattice_pairing_segments(test, coupling.v, noise.lattice(), &[seg])
}

/// Per-slice weights of the first chaos Z⁽¹⁾ = Σₖ Σ_z aₖ(z) ξₖ(z), with
/// aₖ = √V δt δx² Σᵢ coefᵢ (κᵏfᵢ)(κ^{N−k}hᵢ), and its exact variance.
pub struct FirstChaos {
    a: Vec<Vec<f64>>,
    pub variance: f64,
}

impl FirstChaos {
    pub fn new(test: &GaussianTest, v: f64, noise: &NoiseRealization) -> Result<Self> {
        test.validate()?;
        let lattice = noise.lattice();
        let (n, steps) = (lattice.n, noise.n_slices());
        let taps = heat_taps(lattice.dt, lattice.dx);
        let mut scratch = vec![0.0; n * n];
        let scale = v.sqrt() * lattice.dt * lattice.dx * lattice.dx;
        let mut a = vec![vec![0.0; n * n]; steps];
        for t in &test.terms {
            let mut f = gaussian_on(lattice, test.var, t.mx);
            let mut fs = Vec::with_capacity(steps);
            for _ in 0..steps {
                fs.push(f.clone());
                heat_step(&mut f, &mut scratch, n, &taps);
            }
            let mut h = gaussian_on(lattice, test.var, t.my);
            for k in (0..steps).rev() {
                heat_step(&mut h, &mut scratch, n, &taps);
                for ((x, p), q) in a[k].iter_mut().zip(&fs[k]).zip(&h) {
                    *x += t.coef * scale * p * q;
                }
            }
        }
        let m = (0..).take_while(|&d| noise.covariance([d, 0]) > 0.0).last().unwrap_or(0);
        let mut stencil = Vec::new();
        for p in -m..=m {
            for q in -m..=m {
                let d = noise.covariance([p, q]);
                if d != 0.0 {
                    stencil.push((p as isize, q as isize, d));
                }
            }
        }
        let variance = a
            .par_iter()
            .map(|ak| {
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let x = ak[i * n + j];
                        if x == 0.0 {
                            continue;
                        }
                        for &(p, q, d) in &stencil {
                            let (ii, jj) = (i as isize + p, j as isize + q);
                            if ii >= 0 && jj >= 0 && (ii as usize) < n && (jj as usize) < n {
                                acc += x * d * ak[ii as usize * n + jj as usize];
                            }
                        }
                    }
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        Ok(FirstChaos { a, variance })
    }

    fn add_slice(&self, first: i64, slice: &NoiseSlice, acc: &mut f64) {
        let ak = &self.a[(slice.index - first) as usize];
        *acc += ak.iter().zip(&slice.values).map(|(a, x)| a * x).sum::<f64>();
    }
}

/// ⟨Z_{s,t}, φ⟩ together with its first chaos component.
pub fn lattice_pairing_with_chaos(
    test: &GaussianTest,
    coupling: &CouplingSchedule,
    noise: &NoiseRealization,
    chaos: &FirstChaos,
) -> Result<(f64, f64)> {
    check_coupling(coupling, noise)?;
    if chaos.a.len() != noise.n_slices() {
        return Err(Error::Shape("first chaos built for a different number of slices".into()));
    }
    let seg = Segment::Noise { noise, first: noise.first_slice(), count: noise.n_slices() };
    let mut z1 = 0.0;
    let first = noise.first_slice();
    let z = backward(test, coupling.v, noise.lattice(), &[seg], &mut |s| chaos.add_slice(first, s, &mut z1))?;
    Ok((z, z1))
}

/// Estimates of E⟨Z, φ⟩ and Var⟨Z, φ⟩ over independent noise realizations.
///
/// `var` uses the first chaos as a control variate:
/// Var Z = Var Z⁽¹⁾ + E[(Z − EZ)² − (Z⁽¹⁾)²], with Var Z⁽¹⁾ and EZ exact on
/// the lattice. `var_plain` is the ordinary sample variance. Both errors are
/// bootstrap estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariancePairing {
    pub n_noise: usize,
    pub mean: f64,
    pub mean_se: f64,
    pub exact_mean: f64,
    pub var: f64,
    pub var_se: f64,
    pub var_plain: f64,
    pub var_plain_se: f64,
    pub chaos_var: f64,
    pub samples: Vec<f64>,
    pub chaos_samples: Vec<f64>,
}

fn sample_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Bootstrap standard deviation of `stat` over resamples of `xs`.
pub fn bootstrap_se<F: Fn(&[f64]) -> f64>(xs: &[f64], resamples: usize, seed: u64, stat: F) -> f64 {
    let mut rng = stream_rng(seed, BOOT_TAG, 0);
    let mut buf = vec![0.0; xs.len()];
    let vals: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = xs[rng.random_range(0..xs.len())];
            }
            stat(&buf)
        })
        .collect();
    sample_var(&vals).1.sqrt()
}

/// Bootstrap standard deviation of the sample variance.
pub fn bootstrap_var_se(xs: &[f64], resamples: usize, seed: u64) -> f64 {
    bootstrap_se(xs, resamples, seed, |b| sample_var(b).1)
}

const RESAMPLES: usize = 1000;

impl VariancePairing {
    pub fn from_samples(samples: Vec<f64>, chaos_samples: Vec<f64>, exact_mean: f64, chaos_var: f64, seed: u64) -> Self {
        let (mean, var_plain) = sample_var(&samples);
        let n = samples.len();
        let resid: Vec<f64> =
            samples.iter().zip(&chaos_samples).map(|(z, z1)| (z - exact_mean).powi(2) - z1 * z1).collect();
        let (rm, _) = sample_var(&resid);
        VariancePairing {
            n_noise: n,
            mean,
            mean_se: (var_plain / n as f64).sqrt(),
            exact_mean,
            var: chaos_var + rm,
            var_se: bootstrap_se(&resid, RESAMPLES, seed, |b| b.iter().sum::<f64>() / b.len() as f64),
            var_plain,
            var_plain_se: bootstrap_var_se(&samples, RESAMPLES, seed),
            chaos_var,
            samples,
            chaos_samples,
        }
    }
}

/// Seed of noise realization `i` in an experiment seeded by `seed`.
pub fn realization_seed(seed: u64, i: usize) -> u64 {
    mix(seed ^ mix(i as u64 ^ 0x5eed))
}

/// Samples ⟨Z_{s,t}, φ⟩ over `n_noise` independent realizations.
pub fn estimate_variance_pairing(
    interval: (f64, f64),
    coupling: &CouplingSchedule,
    mollifier: &MollifierSpec,
    test: &GaussianTest,
    n_noise: usize,
    lattice: LatticeSpec,
    seed: u64,
) -> Result<VariancePairing> {
    if n_noise < 2 {
        return Err(domain("at least two noise realizations are needed"));
    }
    let probe = sample_noise(interval, coupling.epsilon, mollifier, lattice, seed)?;
    check_coupling(coupling, &probe)?;
    let chaos = FirstChaos::new(test, coupling.v, &probe)?;
    let exact_mean = lattice_mean_pairing(test, &lattice, probe.n_slices())?;
    let pairs = (0..n_noise)
        .into_par_iter()
        .map(|i| {
            let noise = sample_noise(interval, coupling.epsilon, mollifier, lattice, realization_seed(seed, i))?;
            lattice_pairing_with_chaos(test, coupling, &noise, &chaos)
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (z, z1) = pairs.into_iter().unzip();
    Ok(VariancePairing::from_samples(z, z1, exact_mean, chaos.variance, seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChapmanMc {
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// Standard error of the paired difference lhs − rhs.
    pub diff_se: f64,
    pub n_noise: usize,
}

/// Compares E⟨Z_{r,u}, φ⟩ with E⟨Z_{r,s} •_{t−s} Z_{t,u}, φ⟩. Each
/// realization drives both sides: the left uses all slices of [r, u], the
/// right only those of [r, s] and [t, u], with a plain heat glue across
/// [s, t]. r = s or t = u drops the corresponding noisy factor.
#[allow(clippy::too_many_arguments)]
pub fn chapman_mc(
    times: (f64, f64, f64, f64),
    coupling: &CouplingSchedule,
    mollifier: &MollifierSpec,
    test: &GaussianTest,
    n_noise: usize,
    lattice: LatticeSpec,
    seed: u64,
) -> Result<ChapmanMc> {
    let (r, s, t, u) = times;
    if !(r <= s && s < t && t <= u) || !(r < u) {
        return Err(Error::Ordering(format!("need r <= s < t <= u, got ({r}, {s}, {t}, {u})")));
    }
    if n_noise < 2 {
        return Err(domain("at least two noise realizations are needed"));
    }
    let dt = lattice.dt;
    let idx = |x: f64| (x / dt).round() as i64;
    let pairs = (0..n_noise)
        .into_par_iter()
        .map(|i| {
            let noise = sample_noise((r, u), coupling.epsilon, mollifier, lattice, realization_seed(seed, i))?;
            check_coupling(coupling, &noise)?;
            let whole = Segment::Noise { noise: &noise, first: idx(r), count: (idx(u) - idx(r)) as usize };
            let lhs = lattice_pairing_segments(test, coupling.v, &lattice, &[whole])?;
            let mut segs = Vec::new();
            if idx(s) > idx(r) {
                segs.push(Segment::Noise { noise: &noise, first: idx(r), count: (idx(s) - idx(r)) as usize });
            }
            segs.push(Segment::Heat { steps: (idx(t) - idx(s)) as usize });
            if idx(u) > idx(t) {
                segs.push(Segment::Noise { noise: &noise, first: idx(t), count: (idx(u) - idx(t)) as usize });
            }
            let rhs = lattice_pairing_segments(test, coupling.v, &lattice, &segs)?;
            Ok((lhs, rhs))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let n = n_noise as f64;
    let l: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let rr: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let d: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (lm, lv) = sample_var(&l);
    let (rm, rv) = sample_var(&rr);
    let (_, dv) = sample_var(&d);
    Ok(ChapmanMc {
        lhs: lm,
        lhs_se: (lv / n).sqrt(),
        rhs: rm,
        rhs_se: (rv / n).sqrt(),
        diff_se: (dv / n).sqrt(),
        n_noise,
    })
}

/// ⟨Σ_z f(z)(κ^N h)(z) δx²⟩: the exact mean of the lattice pairing.
pub fn lattice_mean_pairing(test: &GaussianTest, lattice: &LatticeSpec, steps: usize) -> Result<f64> {
    lattice_pairing_segments(test, 0.0, lattice, &[Segment::Heat { steps }])
}
