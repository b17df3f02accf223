//! Gauss–Legendre rules and composite panel integration.

use std::sync::OnceLock;

/// Nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

const MAX_ORDER: usize = 128;

static RULES: [OnceLock<GaussRule>; MAX_ORDER + 1] = [const { OnceLock::new() }; MAX_ORDER + 1];

/// Cached `n`-point Gauss–Legendre rule, `1 <= n <= 128`.
pub fn gauss_legendre(n: usize) -> &'static GaussRule {
    assert!((1..=MAX_ORDER).contains(&n), "unsupported Gauss-Legendre order {n}");
    RULES[n].get_or_init(|| compute_rule(n))
}

fn compute_rule(n: usize) -> GaussRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussRule { nodes, weights }
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre on a single interval.
pub fn gl_interval<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> f64 {
    let rule = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    let mut s = 0.0;
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        s += w * f(c + h * x);
    }
    s * h
}

/// Composite Gauss–Legendre over `panels` equal panels.
pub fn gl_composite<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, panels: usize, n: usize) -> f64 {
    let w = (b - a) / panels as f64;
    (0..panels)
        .map(|k| gl_interval(&mut f, a + k as f64 * w, a + (k + 1) as f64 * w, n))
        .sum()
}

/// Pushes mapped nodes and weights of an `n`-point rule on [a, b] into the output vectors.
pub fn push_nodes(a: f64, b: f64, n: usize, xs: &mut Vec<f64>, ws: &mut Vec<f64>) {
    let rule = gauss_legendre(n);
    let h = 0.5 * (b - a);
    let c = 0.5 * (b + a);
    for (x, w) in rule.nodes.iter().zip(&rule.weights) {
        xs.push(c + h * x);
        ws.push(w * h);
    }
}

/// Adaptive bisection: a panel is accepted when its 16-point value matches the sum over its halves.
pub fn gl_adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: f64, max_depth: u32) -> f64 {
    fn rec<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let left = gl_interval(&mut *f, a, m, 16);
        let right = gl_interval(&mut *f, m, b, 16);
        let sum = left + right;
        if depth == 0 || (sum - whole).abs() <= tol * sum.abs().max(1e-300) {
            return sum;
        }
        rec(f, a, m, left, tol, depth - 1) + rec(f, m, b, right, tol, depth - 1)
    }
    let whole = gl_interval(&mut f, a, b, 16);
    rec(&mut f, a, b, whole, tol, max_depth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        for n in [1, 2, 5, 8, 16, 33, 64, 128] {
            let s: f64 = gauss_legendre(n).weights.iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "n={n} sum={s}");
        }
    }

    #[test]
    fn exact_on_polynomials() {
        for n in [3usize, 8, 16] {
            let deg = 2 * n - 1;
            let got = gl_interval(|x| x.powi(deg as i32 - 1) + x.powi(deg as i32), 0.0, 1.0, n);
            let want = 1.0 / deg as f64 + 1.0 / (deg + 1) as f64;
            assert!((got - want).abs() < 1e-14, "n={n}");
        }
    }

    #[test]
    fn nodes_sorted() {
        let r = gauss_legendre(16);
        assert!(r.nodes.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn composite_and_adaptive() {
        let want = 1.0 - (-3.0f64).exp();
        assert!((gl_composite(|x| (-x).exp(), 0.0, 3.0, 4, 10) - want).abs() < 1e-14);
        let s = gl_adaptive(|x| x.sqrt(), 0.0, 1.0, 1e-13, 40);
        assert!((s - 2.0 / 3.0).abs() < 1e-12);
    }
}
