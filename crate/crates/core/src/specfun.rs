//! Scalar special functions: Gamma, the Volterra function and its derivative,
//! exponential integral, modified Bessel functions of order zero and Gaussian
//! heat kernels.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::quad::gauss_legendre;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Largest argument accepted by the Volterra functions. Above it ν(a) ≈ e^a
/// leaves the double range.
pub const A_MAX: f64 = 700.0;

/// Shared numeric constants and quadrature tolerances.
#[derive(Debug, Clone)]
pub struct Constants {
    pub euler_mascheroni: f64,
    pub tolerances: BTreeMap<String, f64>,
}

impl Default for Constants {
    fn default() -> Self {
        let mut tolerances = BTreeMap::new();
        tolerances.insert("volterra_rel".to_string(), 1e-10);
        tolerances.insert("volterra_tail".to_string(), 1e-18);
        tolerances.insert("kernel_rel".to_string(), 1e-6);
        Constants { euler_mascheroni: EULER_GAMMA, tolerances }
    }
}

/// A Volterra function value with its estimated relative error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraEval {
    pub argument: f64,
    pub value: f64,
    pub rel_error_estimate: f64,
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0 (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut s = LANCZOS[0];
    for (k, c) in LANCZOS.iter().enumerate().skip(1) {
        s += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + s.ln()
}

/// Γ(x) for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

fn check_arg(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() && !a.is_sign_positive() {
        return Err(domain(format!("Volterra argument must be positive, got a = {a}")));
    }
    if a > A_MAX {
        return Err(Error::Overflow(format!("Volterra argument a = {a} exceeds a_max = {A_MAX}")));
    }
    Ok(())
}

/// ∫₀^∞ r^k a^r / Γ(r+1) dr for k ∈ {0, 1}, given ln a, as `(mantissa, log_scale)`
/// with the integral equal to `mantissa · e^{log_scale}`.
fn moment(ln_a: f64, k: i32, order: usize) -> (f64, f64) {
    if ln_a < (0.01f64).ln() {
        return (small_moment(-ln_a, k, order), 0.0);
    }
    let a = ln_a.exp();
    let peak = (a - 0.5).max(0.0);
    let sigma = a.max(1.0).sqrt();
    let log_h = |r: f64| {
        let rk = if k == 1 { r } else { 1.0 };
        (rk, r * ln_a - ln_gamma(r + 1.0))
    };
    let shift = log_h(peak).1;
    let width = sigma.max(2.0);
    let rule = gauss_legendre(order);
    let panel = |lo: f64, hi: f64| {
        let h = 0.5 * (hi - lo);
        let c = 0.5 * (hi + lo);
        let mut s = 0.0;
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let r = c + h * x;
            let (rk, lh) = log_h(r);
            s += w * rk * (lh - shift).exp();
        }
        s * h
    };
    let mut total = 0.0;
    let mut lo = (peak - 14.0 * sigma).max(0.0);
    if lo <= 1.0 {
        total += panel(0.0, 1.0);
        lo = 1.0;
    }
    loop {
        let hi = lo + width;
        let part = panel(lo, hi);
        total += part;
        lo = hi;
        if lo > peak && part <= 1e-18 * total {
            break;
        }
    }
    (total, shift)
}

/// Small-argument branch: r = w/L with L = ln(1/a).
fn small_moment(l: f64, k: i32, order: usize) -> f64 {
    const BREAKS: [f64; 9] = [0.0, 1.0, 3.0, 6.0, 10.0, 16.0, 24.0, 34.0, 46.0];
    let rule = gauss_legendre(order);
    let mut total = 0.0;
    for win in BREAKS.windows(2) {
        let h = 0.5 * (win[1] - win[0]);
        let c = 0.5 * (win[1] + win[0]);
        for (x, wt) in rule.nodes.iter().zip(&rule.weights) {
            let w = c + h * x;
            let wk = if k == 1 { w } else { 1.0 };
            total += wt * h * wk * (-w - ln_gamma(1.0 + w / l)).exp();
        }
    }
    if k == 1 {
        total / (l * l)
    } else {
        total / l
    }
}

fn eval(ln_a: f64, k: i32) -> (f64, f64) {
    let (m, s) = moment(ln_a, k, 20);
    let (m2, _) = moment(ln_a, k, 24);
    (m * s.exp(), ((m - m2) / m2).abs().max(f64::EPSILON))
}

/// ν(a) = ∫₀^∞ a^r / Γ(r+1) dr.
pub fn volterra_nu(a: f64) -> Result<f64> {
    check_arg(a)?;
    let (m, s) = moment(a.ln(), 0, 20);
    Ok(m * s.exp())
}

/// ν′(a) = ∫₀^∞ r a^{r−1} / Γ(r+1) dr.
pub fn volterra_nu_prime(a: f64) -> Result<f64> {
    check_arg(a)?;
    let la = a.ln();
    let (m, s) = moment(la, 1, 20);
    Ok(m * (s - la).exp())
}

/// ν(a) with an error estimate from a second, higher-order rule.
pub fn volterra_nu_eval(a: f64) -> Result<VolterraEval> {
    check_arg(a)?;
    let (value, rel_error_estimate) = eval(a.ln(), 0);
    Ok(VolterraEval { argument: a, value, rel_error_estimate })
}

/// ν′(a) with an error estimate from a second, higher-order rule.
pub fn volterra_nu_prime_eval(a: f64) -> Result<VolterraEval> {
    check_arg(a)?;
    let (v, rel_error_estimate) = eval(a.ln(), 1);
    Ok(VolterraEval { argument: a, value: v / a, rel_error_estimate })
}

/// a·ν′(a) as a function of ln a; usable for arguments far below the
/// smallest positive double.
pub fn a_nu_prime_from_ln(ln_a: f64) -> f64 {
    let (m, s) = moment(ln_a, 1, 20);
    m * s.exp()
}

/// ν(a) as a function of ln a.
pub fn nu_from_ln(ln_a: f64) -> f64 {
    let (m, s) = moment(ln_a, 0, 20);
    m * s.exp()
}

/// Exponential integral E₁(z) for z > 0.
pub fn expint_e1(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::INFINITY;
    }
    if z > 745.0 {
        return 0.0;
    }
    if z < 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            term *= -z / kf;
            let add = term / kf;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return -EULER_GAMMA - z.ln() - sum;
    }
    // modified Lentz continued fraction
    let tiny = 1e-300;
    let mut b = z + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h * (-z).exp()
}

/// e^{−z} I₀(z) for z ≥ 0.
pub fn bessel_i0_scaled(z: f64) -> f64 {
    let z = z.abs();
    if z <= 25.0 {
        let q = 0.25 * z * z;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..200 {
            let kf = k as f64;
            term *= q / (kf * kf);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        return sum * (-z).exp();
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let num = (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        let next = term * num / (8.0 * kf * z);
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * z).sqrt()
}

/// I₀(z).
pub fn bessel_i0(z: f64) -> f64 {
    bessel_i0_scaled(z) * z.abs().exp()
}

/// e^{z} K₀(z) for z > 0.
pub fn bessel_k0_scaled(z: f64) -> f64 {
    if z <= 0.0 {
        return f64::INFINITY;
    }
    if z <= 2.0 {
        return bessel_k0_series(z) * z.exp();
    }
    if z <= 25.0 {
        // e^z K0(z) = ∫₀^∞ exp(−z (cosh t − 1)) dt, trapezoid on an entire integrand
        let h = 0.1;
        let mut sum = 0.5;
        let mut k = 1;
        loop {
            let t = k as f64 * h;
            let v = (-z * (t.cosh() - 1.0)).exp();
            sum += v;
            if v < 1e-18 {
                break;
            }
            k += 1;
        }
        return sum * h;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..80 {
        let kf = k as f64;
        let num = (2.0 * kf - 1.0) * (2.0 * kf - 1.0);
        let next = -term * num / (8.0 * kf * z);
        if next.abs() > term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum {
            break;
        }
    }
    sum * (PI / (2.0 * z)).sqrt()
}

fn bessel_k0_series(z: f64) -> f64 {
    let q = 0.25 * z * z;
    let mut term = 1.0;
    let mut i0 = 1.0;
    let mut harm = 0.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harm += 1.0 / kf;
        i0 += term;
        tail += term * harm;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -((0.5 * z).ln() + EULER_GAMMA) * i0 + tail
}

/// K₀(z) for z > 0.
pub fn bessel_k0(z: f64) -> f64 {
    if z <= 2.0 {
        return bessel_k0_series(z);
    }
    bessel_k0_scaled(z) * (-z).exp()
}

/// Heat kernel g_t(x) = (2πt)^{−n/2} exp(−|x|²/2t) in dimension n = x.len() ∈ {2, 4}.
pub fn gauss_heat(t: f64, x: &[f64]) -> Result<f64> {
    if !(t > 0.0) {
        return Err(domain(format!("heat kernel time must be positive, got t = {t}")));
    }
    let n = x.len();
    if n != 2 && n != 4 {
        return Err(domain(format!("heat kernel dimension must be 2 or 4, got {n}")));
    }
    let r2: f64 = x.iter().map(|v| v * v).sum();
    Ok((2.0 * PI * t).powi(-(n as i32) / 2) * (-r2 / (2.0 * t)).exp())
}

/// Two-dimensional heat kernel from the squared distance.
#[inline]
pub fn g2(t: f64, r2: f64) -> f64 {
    (-r2 / (2.0 * t)).exp() / (2.0 * PI * t)
}
