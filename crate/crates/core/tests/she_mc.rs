use shf_core::kernels::DisorderParam;
use shf_core::measure::{k_pairing, u_mean_pairing, GaussianTest};
use shf_core::she::*;
use shf_core::specfun::g2;

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

fn bump() -> MollifierSpec {
    MollifierSpec::bump(1.0).unwrap()
}

#[test]
fn noise_covariance_matches_lattice_formula() {
    let m = bump();
    let eps = 0.2;
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 0.3);
    let x = [0.013, -0.007];
    let probes = [[0.0, 0.0], [0.04, 0.01], [0.11, -0.09]];
    let n = 10_000;
    let mut prods = vec![Vec::with_capacity(n); probes.len()];
    let mut lag = Vec::with_capacity(n);
    for i in 0..n {
        let noise = sample_noise((0.0, 2.0 * l.dt), eps, &m, l, realization_seed(17, i)).unwrap();
        let s0 = noise.slice(0).unwrap();
        let a = noise.value(&s0, x).unwrap();
        for (p, d) in prods.iter_mut().zip(&probes) {
            p.push(a * noise.value(&s0, [x[0] + d[0], x[1] + d[1]]).unwrap());
        }
        lag.push(a * noise.value(&noise.slice(1).unwrap(), x).unwrap());
    }
    let noise = sample_noise((0.0, l.dt), eps, &m, l, 0).unwrap();
    for (p, d) in prods.iter().zip(&probes) {
        let want = noise.point_covariance(x, [x[0] + d[0], x[1] + d[1]]).unwrap();
        let (got, se) = mean_se(p);
        assert!((got - want).abs() < 5.0 * se, "{d:?}: {got} {want} {se}");
    }
    let (c, se) = mean_se(&lag);
    assert!(c.abs() < 3.0 * se, "cross-slice covariance {c} ± {se}");
}

#[test]
fn mean_is_wiener_for_fixed_start() {
    let m = bump();
    let eps = 0.2;
    let t = 0.04;
    let c = coupling(DisorderParam::new(0.0), eps, &m).unwrap();
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 1.2);
    let (x, y0, var) = ([0.1, 0.0], [0.0, 0.05], 0.02);
    let phi = |y: [f64; 2]| (-((y[0] - y0[0]).powi(2) + (y[1] - y0[1]).powi(2)) / (2.0 * var)).exp();
    let means: Vec<f64> = (0..200)
        .map(|i| {
            let noise = sample_noise((0.0, t), eps, &m, l, realization_seed(1, i)).unwrap();
            feynman_kac(x, &c, phi, "bump", 200, &noise, realization_seed(2, i)).unwrap().mean
        })
        .collect();
    // ∫ g_t(x − y) exp(−|y − y₀|²/2v) dy = 2πv g_{t+v}(x − y₀)
    let d2 = (x[0] - y0[0]).powi(2) + (x[1] - y0[1]).powi(2);
    let want = 2.0 * std::f64::consts::PI * var * g2(t + var, d2);
    let (got, se) = mean_se(&means);
    assert!((got - want).abs() < 3.0 * se, "{got} {want} {se}");
}

#[test]
fn nearby_starts_are_correlated() {
    let m = bump();
    let eps = 0.2;
    let c = coupling(DisorderParam::new(0.0), eps, &m).unwrap();
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 1.0);
    let (x, xp) = ([0.0, 0.0], [0.05, 0.0]);
    let mut pairs = Vec::new();
    for i in 0..200 {
        let noise = sample_noise((0.0, 0.04), eps, &m, l, realization_seed(5, i)).unwrap();
        let a = feynman_kac(x, &c, |_| 1.0, "one", 200, &noise, realization_seed(6, i)).unwrap().mean;
        let b = feynman_kac(xp, &c, |_| 1.0, "one", 200, &noise, realization_seed(7, i)).unwrap().mean;
        pairs.push((a, b));
    }
    let n = pairs.len() as f64;
    let (ma, mb) = (pairs.iter().map(|p| p.0).sum::<f64>() / n, pairs.iter().map(|p| p.1).sum::<f64>() / n);
    let cov = pairs.iter().map(|p| (p.0 - ma) * (p.1 - mb)).sum::<f64>();
    let va = pairs.iter().map(|p| (p.0 - ma).powi(2)).sum::<f64>();
    let vb = pairs.iter().map(|p| (p.1 - mb).powi(2)).sum::<f64>();
    let corr = cov / (va * vb).sqrt();
    assert!(corr > 0.0, "{corr}");
}

#[test]
fn error_bars_cover_the_truth() {
    let m = bump();
    let eps = 0.2;
    let t = 0.02;
    let c = coupling(DisorderParam::new(0.0), eps, &m).unwrap();
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 1.8);
    let test = GaussianTest::single(0.02, [0.0, 0.0], [0.05, 0.0]);
    let truth = u_mean_pairing(t, &test).unwrap();
    let mut hits = 0;
    for rep in 0..100 {
        let means: Vec<f64> = (0..100)
            .map(|i| {
                let s = realization_seed(rep, i);
                let noise = sample_noise((0.0, t), eps, &m, l, s).unwrap();
                feynman_kac_pairing(&test, &c, 50, &noise, s ^ 1).unwrap().mean
            })
            .collect();
        let (mu, se) = mean_se(&means);
        if (mu - truth).abs() <= 2.0 * se {
            hits += 1;
        }
    }
    assert!(hits >= 90, "{hits} of 100");
}

#[test]
fn lattice_mean_and_variance_pairing() {
    let m = bump();
    let eps = 0.1;
    let t = 0.01;
    let c = coupling(DisorderParam::new(0.0), eps, &m).unwrap();
    let test = GaussianTest::single(0.004, [0.0, 0.0], [0.0, 0.0]);
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 0.6);
    let r = estimate_variance_pairing((0.0, t), &c, &m, &test, 400, l, 9).unwrap();
    let want = u_mean_pairing(t, &test).unwrap();
    assert!((r.exact_mean / want - 1.0).abs() < 1e-8);
    assert!((r.mean - want).abs() < 3.0 * r.mean_se, "{} {want} {}", r.mean, r.mean_se);
    // the control-variate and plain variance estimates agree
    let gap = (r.var - r.var_plain).abs();
    assert!(gap < 3.0 * (r.var_se.powi(2) + r.var_plain_se.powi(2)).sqrt());
    assert!(r.chaos_var > 0.0 && r.chaos_var < r.var + 3.0 * r.var_se);
    let k = k_pairing(t, DisorderParam::new(0.0), &test).unwrap();
    assert!(r.var > 0.0 && r.var < 2.0 * k, "{} {k}", r.var);
}

#[test]
fn variance_increases_with_theta() {
    let m = bump();
    let eps = 0.1;
    let t = 0.01;
    let test = GaussianTest::single(0.004, [0.0, 0.0], [0.0, 0.0]);
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 0.6);
    let lo = coupling(DisorderParam::new(-1.0), eps, &m).unwrap();
    let hi = coupling(DisorderParam::new(1.0), eps, &m).unwrap();
    let a = estimate_variance_pairing((0.0, t), &lo, &m, &test, 400, l, 3).unwrap();
    let b = estimate_variance_pairing((0.0, t), &hi, &m, &test, 400, l, 3).unwrap();
    assert!(b.var - a.var > 3.0 * (a.var_se.powi(2) + b.var_se.powi(2)).sqrt(), "{} {}", a.var, b.var);
}

#[test]
fn chapman_means_agree() {
    let m = bump();
    let eps = 0.1;
    let c = coupling(DisorderParam::new(0.0), eps, &m).unwrap();
    let test = GaussianTest::single(0.01, [0.0, 0.0], [0.0, 0.0]);
    let l = LatticeSpec::resolving(eps, [0.0, 0.0], 0.8);
    let r = chapman_mc((0.0, 0.01, 0.02, 0.03), &c, &m, &test, 200, l, 4).unwrap();
    assert!((r.lhs - r.rhs).abs() < 3.0 * r.diff_se, "{r:?}");
    let truth = u_mean_pairing(0.03, &test).unwrap();
    assert!((r.lhs - truth).abs() < 3.0 * r.lhs_se && (r.rhs - truth).abs() < 3.0 * r.rhs_se);
}
