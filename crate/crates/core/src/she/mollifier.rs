//! The radial bump j(x) = c(1 − |x|²/ρ²)³ on |x| ≤ ρ, its autocorrelation J
//! and the constant I_J.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::quad::{gauss_legendre, gl_interval};
use crate::specfun::EULER_GAMMA;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollifierSpec {
    /// Support radius ρ.
    pub rho: f64,
    /// Normalization c.
    pub c: f64,
    /// ‖j‖₂² = J(0).
    pub j_l2_sq: f64,
    /// I_J = γ − ln 2 + ∫∫ ln|x−y| J(x) J(y) dx dy.
    pub i_j: f64,
}

impl MollifierSpec {
    /// The unit-mass bump of radius ρ.
    pub fn bump(rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(domain(format!("mollifier radius must be positive, got {rho}")));
        }
        let c = 4.0 / (PI * rho * rho);
        Ok(MollifierSpec { rho, c, j_l2_sq: c * c * PI * rho * rho / 7.0, i_j: compute_i_j(rho, c)? })
    }

    pub fn j_radial(&self, r: f64) -> f64 {
        bump(self.rho, self.c, r * r)
    }

    pub fn j(&self, x: [f64; 2]) -> f64 {
        bump(self.rho, self.c, x[0] * x[0] + x[1] * x[1])
    }

    /// j_ε(x) = ε⁻² j(x/ε).
    pub fn j_eps(&self, eps: f64, x: [f64; 2]) -> f64 {
        self.j([x[0] / eps, x[1] / eps]) / (eps * eps)
    }

    /// J(x) = ∫ j(y) j(x+y) dy at |x| = r.
    pub fn autocorrelation(&self, r: f64) -> f64 {
        autocorrelation(self.rho, self.c, r)
    }

    /// J_ε(x) = ε⁻² J(x/ε).
    pub fn autocorrelation_eps(&self, eps: f64, r: f64) -> f64 {
        self.autocorrelation(r / eps) / (eps * eps)
    }
}

fn bump(rho: f64, c: f64, r2: f64) -> f64 {
    let q = 1.0 - r2 / (rho * rho);
    if q <= 0.0 {
        0.0
    } else {
        c * q * q * q
    }
}

/// ∫ j = 2π ∫₀^ρ j(s) s ds.
fn mass(rho: f64, c: f64) -> f64 {
    2.0 * PI * gl_interval(|s| bump(rho, c, s * s) * s, 0.0, rho, 16)
}

fn autocorrelation(rho: f64, c: f64, r: f64) -> f64 {
    let r = r.abs();
    if r >= 2.0 * rho {
        return 0.0;
    }
    if r == 0.0 {
        return c * c * PI * rho * rho / 7.0;
    }
    // slices at fixed y₂: the y₁ integrand is a degree-12 polynomial on the
    // overlap [r/2 − a, a − r/2] (shifted), so 8 Gauss nodes are exact
    let inner = gauss_legendre(8);
    let slice = |y2: f64| {
        let a = (rho * rho - y2 * y2).max(0.0).sqrt();
        let h = a - 0.5 * r;
        if h <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for (x, w) in inner.nodes.iter().zip(&inner.weights) {
            let u = h * x;
            acc += w * bump(rho, c, (u - 0.5 * r).powi(2) + y2 * y2) * bump(rho, c, (u + 0.5 * r).powi(2) + y2 * y2);
        }
        h * acc
    };
    let b = (rho * rho - 0.25 * r * r).sqrt();
    2.0 * gl_interval(slice, 0.0, b, 48)
}

/// I_J for the bump of radius ρ and normalization c, via the radial form
/// ∫∫ ln|x−y| J(x) J(y) dx dy = 2 ∫₀^{2ρ} A(r) ln r (∫₀^r A) dr, A(r) = 2πrJ(r).
pub fn compute_i_j(rho: f64, c: f64) -> Result<f64> {
    let m = mass(rho, c);
    if (m - 1.0).abs() > 1e-10 {
        return Err(domain(format!("mollifier is not normalized: ∫j = {m}")));
    }
    let a = |r: f64| 2.0 * PI * r * autocorrelation(rho, c, r);
    let rule = gauss_legendre(16);
    let panels = 48;
    let width = 2.0 * rho / panels as f64;
    let mut cum = 0.0;
    let mut total = 0.0;
    for p in 0..panels {
        let lo = p as f64 * width;
        let (h, mid) = (0.5 * width, lo + 0.5 * width);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let r = mid + h * x;
            let inner = cum + gl_interval(a, lo, r, 16);
            total += w * h * a(r) * r.ln() * inner;
        }
        cum += gl_interval(a, lo, lo + width, 16);
    }
    Ok(EULER_GAMMA - 2f64.ln() + 2.0 * total)
}
