//! Gluing identities on grid measures and second-moment pairings.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use shf_core::kernels::{DisorderParam, KernelRule, RadialNodes};
use shf_core::measure::*;
use shf_core::specfun::g2;
use shf_core::Error;

fn d2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

fn heat_measure(t: f64, a: SlotGrid, b: SlotGrid) -> GridMeasure {
    GridMeasure::from_density(vec![a, b], |p| g2(t, d2(p[0], p[1]))).unwrap()
}

fn random_measure(rng: &mut ChaCha8Rng, slots: Vec<SlotGrid>) -> GridMeasure {
    let n: usize = slots.iter().map(|s| s.cells()).product();
    let w = (0..n).map(|_| rng.random::<f64>()).collect();
    let k = slots.len();
    GridMeasure::new(slots, vec![false; k], w).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn point_masses_glue_to_gaussian() {
    let g = SlotGrid::centered(8, 2.0).unwrap();
    let (x, a, b, y) = ([0.1, 0.1], [0.6, -0.4], [-0.9, 0.2], [1.1, 1.1]);
    let m1 = GridMeasure::point_mass(vec![g, g], &[x, a], 1.0).unwrap();
    let m2 = GridMeasure::point_mass(vec![g, g], &[b, y], 1.0).unwrap();
    let glued = m1.bullet_sigma(&m2, 0.3).unwrap();
    let ca = g.center(g.locate(a).unwrap());
    let cb = g.center(g.locate(b).unwrap());
    assert!(rel(glued.total_mass(), g2(0.3, d2(ca, cb))) < 1e-14);
    assert!(m1.bullet_sigma(&m2, 0.0).is_err());
    assert!(m1.bullet_sigma(&m2, -1.0).is_err());
}

#[test]
fn heat_glue_matches_convolved_heat_kernel() {
    let outer = SlotGrid::centered(6, 1.5).unwrap();
    let inner = SlotGrid::centered(48, 4.8).unwrap();
    let (a, b, sigma) = (0.5, 0.5, 0.1);
    let ua = heat_measure(a, outer, inner);
    let ub = heat_measure(b, inner, outer);
    let glued = ua.bullet_sigma(&ub, sigma).unwrap();
    let phi = |p: &[[f64; 2]]| (-(d2(p[0], [0.2, 0.0]) + d2(p[1], [0.0, -0.1])) / 2.0).exp();
    let got = glued.pairing(phi);
    let want = heat_measure(a + sigma + b, outer, outer).pairing(phi);
    assert!(rel(got, want) < 1e-3, "{got} {want}");
}

#[test]
fn circ_projects_to_bullet() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g1 = SlotGrid::centered(5, 1.0).unwrap();
    let g2_ = SlotGrid::new(4, 0.45, -0.8).unwrap();
    let m1 = random_measure(&mut rng, vec![g1, g2_]);
    let m2 = random_measure(&mut rng, vec![g1, g2_]);
    let circ = m1.circ_sigma(&m2, 0.2).unwrap();
    assert_eq!(circ.arity(), 3);
    let proj = circ.project(&[0, 2]).unwrap();
    let bullet = m1.bullet_sigma(&m2, 0.2).unwrap();
    for (p, b) in proj.weights().iter().zip(bullet.weights()) {
        assert!((p - b).abs() <= 1e-14 * b.abs().max(1e-300), "{p} {b}");
    }
    let bound = g2(0.2, 0.0) * m1.total_mass() * m2.total_mass();
    assert!(circ.total_mass() <= bound);
}

#[test]
fn project_identity_and_mass() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let g = SlotGrid::centered(4, 1.0).unwrap();
    let m = random_measure(&mut rng, vec![g, g, g]);
    assert_eq!(m.project(&[0, 1, 2]).unwrap(), m);
    for kept in [vec![0], vec![1], vec![2], vec![0, 2], vec![1, 2], vec![]] {
        let p = m.project(&kept).unwrap();
        assert!(rel(p.total_mass(), m.total_mass()) < 1e-14);
    }
    assert!(matches!(m.project(&[2, 1]), Err(Error::Shape(_))));
    assert!(matches!(m.project(&[3]), Err(Error::Shape(_))));
}

#[test]
fn bullet_density_requires_a_density() {
    let g = SlotGrid::centered(4, 1.0).unwrap();
    let m = GridMeasure::point_mass(vec![g, g], &[[0.1, 0.1], [0.3, 0.3]], 1.0).unwrap();
    assert!(matches!(m.bullet_density(&m), Err(Error::Domain(_))));
}

#[test]
fn smoothing_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = SlotGrid::centered(5, 1.2).unwrap();
    let m1 = random_measure(&mut rng, vec![g, g]);
    let m2 = random_measure(&mut rng, vec![g, g]);
    let direct = m1.bullet_sigma(&m2, 0.15).unwrap();
    let right = m1.bullet_density(&m2.smooth_first(0.15).unwrap()).unwrap();
    let left = m1.smooth_last(0.15).unwrap().bullet_density(&m2).unwrap();
    for ((d, r), l) in direct.weights().iter().zip(right.weights()).zip(left.weights()) {
        assert!((d - r).abs() <= 1e-12 * d);
        assert!((d - l).abs() <= 1e-12 * d);
    }
}

#[test]
fn density_glue_is_the_small_sigma_limit() {
    let outer = SlotGrid::centered(4, 1.0).unwrap();
    let inner = SlotGrid::centered(80, 4.0).unwrap();
    let ua = heat_measure(0.4, outer, inner);
    let ub = heat_measure(0.6, inner, outer);
    let phi = |p: &[[f64; 2]]| (-(d2(p[0], [0.0, 0.0]) + d2(p[1], [0.3, 0.0])) / 2.0).exp();
    let exact = ua.bullet_density(&ub).unwrap().pairing(phi);
    let want = heat_measure(1.0, outer, outer).pairing(phi);
    assert!(rel(exact, want) < 1e-4, "{exact} {want}");
    let gaps: Vec<f64> = [0.1, 0.05, 0.01]
        .iter()
        .map(|&s| (ua.bullet_sigma(&ub, s).unwrap().pairing(phi) - exact).abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
}

#[test]
fn csv_and_binary_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = SlotGrid::new(3, 0.5, -0.7).unwrap();
    let m = random_measure(&mut rng, vec![g, g]);
    let csv = dir.path().join("m.csv");
    m.write_csv(&csv).unwrap();
    let back = GridMeasure::read_csv(&csv, vec![g, g], vec![false, false]).unwrap();
    for (a, b) in m.weights().iter().zip(back.weights()) {
        assert!((a - b).abs() <= 1e-15 * a.abs());
    }
    let bin = dir.path().join("m.bin");
    m.save(&bin).unwrap();
    assert_eq!(GridMeasure::load(&bin).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn circ_is_associative(seed in 0u64..1000, sigma in 0.05f64..1.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = SlotGrid::centered(3, 1.0).unwrap();
        let h = SlotGrid::new(2, 0.7, -0.5).unwrap();
        let m1 = random_measure(&mut rng, vec![g, h]);
        let m2 = random_measure(&mut rng, vec![h, g]);
        let m3 = random_measure(&mut rng, vec![g, h]);
        let left = m1.circ_sigma(&m2, sigma).unwrap().circ_sigma(&m3, sigma).unwrap();
        let right = m1.circ_sigma(&m2.circ_sigma(&m3, sigma).unwrap(), sigma).unwrap();
        prop_assert_eq!(left.arity(), 4);
        for (a, b) in left.weights().iter().zip(right.weights()) {
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn projection_preserves_mass(seed in 0u64..1000, keep in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = SlotGrid::centered(3, 1.0).unwrap();
        let m = random_measure(&mut rng, vec![g, g, g]);
        let p = m.project(&[keep]).unwrap();
        prop_assert!((p.total_mass() - m.total_mass()).abs() <= 1e-14 * m.total_mass());
    }
}

#[test]
fn u_marginal_semigroup() {
    let three = u_density(&Partition::new(vec![0.0, 0.3, 1.0]).unwrap());
    let two = u_density(&Partition::new(vec![0.0, 1.0]).unwrap());
    let (x, z) = ([0.3, -0.2], [0.8, 0.5]);
    let n = 200;
    let h = 12.0 / n as f64;
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            let y = [-6.0 + (i as f64 + 0.5) * h, -6.0 + (j as f64 + 0.5) * h];
            s += three.eval(&[x, y, z]).unwrap() * h * h;
        }
    }
    let want = two.eval(&[x, z]).unwrap();
    assert!(rel(s, want) < 1e-10, "{s} {want}");
}

#[test]
fn q_close_to_product_when_k_is_negligible() {
    let p = Partition::new(vec![0.0, 0.4, 1.0]).unwrap();
    let pts = [[0.5, 0.2], [-0.3, 0.1], [0.2, 0.6], [0.9, -0.4], [-0.1, 0.0], [0.4, 0.8]];
    let u = u_density(&p);
    let evens: Vec<_> = pts.iter().step_by(2).copied().collect();
    let odds: Vec<_> = pts.iter().skip(1).step_by(2).copied().collect();
    let uu = u.eval(&evens).unwrap() * u.eval(&odds).unwrap();
    let far = q_density(&p, DisorderParam::new(-1e8)).unwrap().eval(&pts).unwrap();
    assert!(rel(far, uu) < 1e-5, "{far} {uu}");
    // at ϑ = −30 the kernel is only suppressed like 1/|ϑ|
    let mid = k_density(&p, DisorderParam::new(-30.0)).unwrap().eval(&pts).unwrap();
    assert!(mid > 1e-3 * uu && mid < 0.2 * uu, "{mid} {uu}");
}

#[test]
fn q_interior_pair_projects_out() {
    let th = DisorderParam::new(0.0);
    let three = q_density(&Partition::new(vec![0.0, 0.4, 1.0]).unwrap(), th).unwrap();
    let two = q_density(&Partition::new(vec![0.0, 1.0]).unwrap(), th).unwrap();
    let (x, xp, z, zp) = ([0.4, 0.1], [-0.2, 0.3], [0.1, -0.5], [0.6, 0.2]);
    let s = FRAC_1_SQRT_2;
    let from_rot = |xi: [f64; 2], eta: [f64; 2]| {
        let y = [(xi[0] + eta[0]) * s, (xi[1] + eta[1]) * s];
        let yp = [(xi[0] - eta[0]) * s, (xi[1] - eta[1]) * s];
        three.eval(&[x, xp, y, yp, z, zp]).unwrap()
    };
    // the density factorizes in (ξ, η), so integrate each factor through a
    // reference point and divide out the double count
    let (xi0, eta0) = ([0.2, 0.0], [0.3, 0.2]);
    let n = 160;
    let h = 12.0 / n as f64;
    let mut a = 0.0;
    for i in 0..n {
        for j in 0..n {
            let xi = [-6.0 + (i as f64 + 0.5) * h, -6.0 + (j as f64 + 0.5) * h];
            a += from_rot(xi, eta0) * h * h;
        }
    }
    let nodes = RadialNodes::new(7.0, 0.1);
    let n_ang = 256;
    let mut b = 0.0;
    for (&r, &w) in nodes.rho.iter().zip(&nodes.weight) {
        let mut ring = 0.0;
        for k in 0..n_ang {
            let phi = 2.0 * PI * k as f64 / n_ang as f64;
            ring += from_rot(xi0, [r * phi.cos(), r * phi.sin()]);
        }
        b += w * r * ring * 2.0 * PI / n_ang as f64;
    }
    let got = a * b / from_rot(xi0, eta0);
    let want = two.eval(&[x, xp, z, zp]).unwrap();
    assert!(rel(got, want) < 1e-3, "{got} {want}");
}

fn test_fn() -> GaussianTest {
    GaussianTest::single(0.5, [0.2, -0.1], [0.0, 0.3])
}

#[test]
fn q_pairing_semigroup() {
    let th = DisorderParam::new(0.0);
    let test = test_fn();
    for (a, b) in [(0.25, 0.25), (0.25, 0.5), (0.5, 0.5)] {
        let ka = KernelRule::new(a, th, 1e-6).unwrap();
        let kb = KernelRule::new(b, th, 1e-6).unwrap();
        let nodes = chain_nodes(&test, a + b, a.min(b));
        let glued = chain_pairing(&[ChainOp::Semigroup(&ka), ChainOp::Semigroup(&kb)], &test, &nodes).unwrap();
        let whole = q_pairing(a + b, th, &test).unwrap();
        assert!(rel(glued, whole) < 1e-3, "a={a} b={b}: {glued} {whole}");
    }
}

#[test]
fn rotated_factorization_matches_polar_sum() {
    let th = DisorderParam::new(0.5);
    let t = 0.6;
    let c = 0.5;
    let test = GaussianTest::single(c, [0.3, 0.0], [-0.2, 0.4]);
    let rule = KernelRule::new(t, th, 1e-6).unwrap();
    let via_chain = q_pairing(t, th, &test).unwrap();
    // ξ part in closed form, η part as a polar double sum of P itself
    let alpha = [0.3 * 2f64.sqrt(), 0.0];
    let beta = [-0.2 * 2f64.sqrt(), 0.4 * 2f64.sqrt()];
    let xi = (2.0 * PI * c).powi(2) * g2(t + 2.0 * c, d2(alpha, beta));
    let nodes = RadialNodes::new(6.0, 0.5);
    let nr = nodes.len();
    let kmat: Vec<f64> = (0..nr * nr)
        .into_par_iter()
        .map(|k| rule.k(nodes.rho[k / nr], nodes.rho[k % nr]))
        .collect();
    let n_ang = 32;
    let pts: Vec<(usize, [f64; 2], f64)> = (0..nr)
        .flat_map(|i| {
            let (r, w) = (nodes.rho[i], nodes.weight[i]);
            (0..n_ang).map(move |k| {
                let phi = 2.0 * PI * k as f64 / n_ang as f64;
                let wt = w * r * 2.0 * PI / n_ang as f64 * (-r * r / (2.0 * c)).exp();
                (i, [r * phi.cos(), r * phi.sin()], wt)
            })
        })
        .collect();
    let eta: f64 = pts
        .par_iter()
        .map(|&(i, a, wa)| {
            pts.iter().map(|&(j, b, wb)| wb * (g2(t, d2(a, b)) + kmat[i * nr + j])).sum::<f64>() * wa
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum();
    let direct = xi * eta;
    assert!(rel(via_chain, direct) < 1e-3, "{via_chain} {direct}");
}

#[test]
fn k_pairing_is_a_variance() {
    let th = DisorderParam::new(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..6 {
        let terms = (0..3)
            .map(|_| GaussTerm {
                coef: rng.random_range(-1.0..1.0),
                mx: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
                my: [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)],
            })
            .collect();
        let test = GaussianTest { var: 0.3, terms };
        let v = k_pairing(0.5, th, &test).unwrap();
        let scale = k_pairing(0.5, th, &GaussianTest { var: 0.3, terms: test.terms.iter().map(|t| GaussTerm { coef: t.coef.abs(), ..*t }).collect() }).unwrap();
        assert!(v >= -1e-6 * scale, "{v} {scale}");
    }
    // ⟨Q, φ⊗φ⟩ = ⟨U, φ⟩² + ⟨K, φ⊗φ⟩
    let test = test_fn();
    let q = q_pairing(0.5, th, &test).unwrap();
    let split = u_pairing(0.5, &test).unwrap() + k_pairing(0.5, th, &test).unwrap();
    assert!(rel(q, split) < 1e-10);
}

#[test]
fn chapman_second_moment_identity() {
    let th = DisorderParam::new(0.0);
    let test = test_fn();
    let (lhs, rhs) = chapman_defect((0.0, 0.3, 0.5, 1.0), th, &test).unwrap();
    assert!(rhs > 0.0);
    assert!(rel(lhs, rhs) <= 5e-2, "{lhs} {rhs}");
    let ladder: Vec<f64> = [0.2, 0.1, 0.05, 0.02]
        .iter()
        .map(|&d| chapman_defect((0.0, 0.5, 0.5 + d, 1.0), th, &test).unwrap().1)
        .collect();
    assert!(ladder.windows(2).all(|w| w[1] < w[0]), "{ladder:?}");
    let q = q_pairing(1.0, DisorderParam::new(-1e8), &test).unwrap();
    let (_, tiny) = chapman_defect((0.0, 0.3, 0.5, 1.0), DisorderParam::new(-1e8), &test).unwrap();
    assert!(tiny.abs() < 1e-6 * q, "{tiny} {q}");
}
