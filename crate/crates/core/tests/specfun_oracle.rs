//! Volterra functions against a brute-force adaptive Simpson reference that
//! integrates in s = √r with an independent log-gamma.

use shf_core::specfun::{
    a_nu_prime_from_ln, volterra_nu, volterra_nu_prime, EULER_GAMMA,
};
use statrs::function::gamma::ln_gamma;

mod common;
use common::adaptive;

/// Returns (ν(a), ν′(a)) with r = s².
fn oracle(a: f64) -> (f64, f64) {
    let la = a.ln();
    let r_end = a + 40.0 * (a + 1.0).sqrt() + 60.0;
    let s_end = r_end.sqrt();
    let nu = adaptive(|s| 2.0 * s * (s * s * la - ln_gamma(s * s + 1.0)).exp(), 0.0, s_end, 1e-14);
    let d = adaptive(
        |s| 2.0 * s * s * s * ((s * s - 1.0) * la - ln_gamma(s * s + 1.0)).exp(),
        0.0,
        s_end,
        1e-14,
    );
    (nu, d)
}

#[test]
fn matches_oracle_on_log_grid() {
    for i in 0..24 {
        let a = 1e-6 * (1e8f64).powf(i as f64 / 23.0);
        let (nu, d) = oracle(a);
        let e1 = (volterra_nu(a).unwrap() / nu - 1.0).abs();
        let e2 = (volterra_nu_prime(a).unwrap() / d - 1.0).abs();
        assert!(e1 < 1e-9 && e2 < 1e-9, "a={a}: {e1:e} {e2:e}");
    }
}

#[test]
fn frozen_reference_values() {
    // 25-digit quadrature, frozen
    let cases = [
        (1.0, 2.266_534_507_699_848_8, 2.807_770_242_028_519_4),
        (1e-8, 0.055_777_594_064_133, 309_756.408_978_072_9),
        (30.0, 10_686_474_581_524.24, 10_686_474_581_524.463),
    ];
    for (a, nu, d) in cases {
        assert!((volterra_nu(a).unwrap() / nu - 1.0).abs() < 1e-12, "nu({a})");
        assert!((volterra_nu_prime(a).unwrap() / d - 1.0).abs() < 1e-12, "nu'({a})");
        let (on, od) = oracle(a);
        assert!((on / nu - 1.0).abs() < 1e-11 && (od / d - 1.0).abs() < 1e-11, "oracle at {a}");
    }
}

#[test]
fn small_argument_laplace_regime() {
    // a L² ν′(a) = 1 + 2γ/L + O(1/L²)
    for l in [50.0, 200.0, 1000.0] {
        let q = a_nu_prime_from_ln(-l) * l * l;
        let lead = 1.0 + 2.0 * EULER_GAMMA / l;
        assert!((q - lead).abs() < 5.0 / (l * l), "L={l}: {q} vs {lead}");
    }
}

