//! Brute-force references shared by the integration tests.
#![allow(dead_code)]

pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // integrands built as exp(difference of large terms) carry ~1e-13 relative noise
    let floor = 1e-13 * (left + right).abs();
    if depth == 0 || delta.abs() <= 15.0 * tol.max(floor) {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

pub fn adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    adaptive_n(f, a, b, rel_tol, 256)
}

pub fn adaptive_n<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, pieces: usize) -> f64 {
    let h = (b - a) / pieces as f64;
    let rough: f64 = (0..pieces).map(|i| f(a + (i as f64 + 0.5) * h).abs() * h).sum();
    assert!(rough.is_finite(), "integrand is not finite on [{a}, {b}]");
    let tol = rel_tol * rough / (pieces as f64).sqrt();
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson(&f, lo, hi, fa, fm, fb, whole, tol, 40)
        })
        .sum()
}
