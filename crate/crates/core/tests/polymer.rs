use shf_core::kernels::{drift_eval, DisorderParam};
use shf_core::polymer::*;

fn radii(xs: &[[f64; 2]]) -> Vec<f64> {
    xs.iter().map(|x| (x[0] * x[0] + x[1] * x[1]).sqrt()).collect()
}

#[test]
fn gaussian_control_matches_heat_kernel() {
    let th = DisorderParam::new(-1e8);
    let table = DriftTable::new(1.0, th, 0.01, 50, DEFAULT_CORE_FACTOR).unwrap();
    let e = sample_paths(&table, [1.0, 0.0], 20_000, 5, 50).unwrap();
    let g = transition_check(&e, 0.5, 12, 0).unwrap();
    assert!(g.p_value > 0.05, "{g:?}");
}

#[test]
fn one_step_mean_is_the_drift() {
    let th = DisorderParam::new(0.0);
    let (dt, x0) = (1e-3, [0.3, 0.4]);
    let table = DriftTable::new(1.0, th, dt, 1, DEFAULT_CORE_FACTOR).unwrap();
    let n = 100_000;
    let e = sample_paths(&table, x0, n, 7, 1).unwrap();
    let b = drift_eval(1.0, th, x0).unwrap().vector(x0);
    let se = (dt / n as f64).sqrt();
    for c in 0..2 {
        let mean = e.paths.iter().map(|p| p[1][c]).sum::<f64>() / n as f64;
        assert!((mean - x0[c] - b[c] * dt).abs() < 3.0 * se, "{c}: {} {}", mean - x0[c], b[c] * dt);
    }
}

#[test]
fn paths_are_attracted_to_the_origin() {
    let n = 4000;
    let frac = |theta: f64| {
        let table = DriftTable::new(1.0, DisorderParam::new(theta), 1e-3, 1000, DEFAULT_CORE_FACTOR).unwrap();
        let e = sample_paths(&table, [0.5, 0.0], n, 11, 1).unwrap();
        let hits = e.paths.iter().filter(|p| radii(p).iter().any(|&r| r <= 0.05)).count();
        hits as f64 / n as f64
    };
    let (polymer, brownian) = (frac(1.0), frac(-1e8));
    let se = (polymer * (1.0 - polymer) / n as f64 + brownian * (1.0 - brownian) / n as f64).sqrt();
    assert!(polymer - brownian > 3.0 * se, "{polymer} {brownian} {se}");
}

#[test]
fn drift_trace_obeys_the_blow_up_bound() {
    let p = DriftProfile::new(1.0, DisorderParam::new(0.0), 1e-4).unwrap();
    let mut seen = 0;
    for (r, b) in p.trace() {
        if (1e-4..=1e-2).contains(&r) {
            let v = b * r * (1.0 / r).ln();
            assert!(v > 0.7 && v < 1.3, "{r}: {v}");
            seen += 1;
        }
    }
    assert!(seen > 10);
}

#[test]
fn radial_law_is_rotation_invariant() {
    let table = DriftTable::new(1.0, DisorderParam::new(0.0), 0.01, 50, DEFAULT_CORE_FACTOR).unwrap();
    let a = sample_paths(&table, [1.0, 0.0], 20_000, 21, 50).unwrap();
    let b = sample_paths(&table, [0.6, 0.8], 20_000, 22, 50).unwrap();
    let (_, _, p) = two_sample_chi_square(&radii(&a.at_time(0.5).unwrap()), &radii(&b.at_time(0.5).unwrap()), 12).unwrap();
    assert!(p > 0.05, "{p}");
}

#[test]
fn halving_the_step_does_not_worsen_the_fit() {
    let th = DisorderParam::new(0.0);
    let stat = |dt: f64| {
        let steps = (0.5 / dt).round() as usize;
        let table = DriftTable::new(1.0, th, dt, steps, DEFAULT_CORE_FACTOR).unwrap();
        let e = sample_paths(&table, [1.0, 0.0], 20_000, 3, steps).unwrap();
        transition_check(&e, 0.5, 16, 1).unwrap().statistic
    };
    let (coarse, fine) = (stat(0.05), stat(0.025));
    assert!(fine < coarse, "{coarse} {fine}");
}

#[test]
fn local_time_stabilizes_near_the_origin() {
    let e = sample_v_chain(0.25, DisorderParam::new(0.0), [0.05, 0.0], 2.5e-5, 400, &[0.02, 0.01], 8).unwrap();
    let (c2, c1) = (0.5 / (0.02f64.powi(2) * 50f64.ln().powi(2)), 0.5 / (0.01f64.powi(2) * 100f64.ln().powi(2)));
    let close: Vec<&Vec<f64>> = e.occupation.iter().filter(|o| o[0] > 0.0).collect();
    assert!(close.len() > 100);
    let l2 = close.iter().map(|o| c2 * o[0]).sum::<f64>() / close.len() as f64;
    let l1 = close.iter().map(|o| c1 * o[1]).sum::<f64>() / close.len() as f64;
    assert!(l1 / l2 > 0.5 && l1 / l2 < 2.0, "{l2} {l1}");
}
