mod common;

use approx::assert_abs_diff_eq;
use fbwave::coeffs::func;
use fbwave::singular::{terminal_left, zeta_left, CStar};
use fbwave::{
    compute_beta, compute_cstar, indicial_slopes, solve_zeta, Func, SingularProblem, SolverConfig, ThresholdId,
    Transform,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn transforms() {
    assert_abs_diff_eq!(Transform::Bar.point(0.3), 0.7);
    assert_eq!(Transform::Bar.interval(0.3, 1.0), (0.0, 0.7));
    let f = func(|x| x * x * x - 0.2 * x + 0.1);
    let bb = Transform::Bar.function(Transform::Bar.function(f.clone()));
    let tt = Transform::Tilde.function(Transform::Tilde.function(f.clone()));
    let t = Transform::Tilde.function(f.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..100 {
        let x: f64 = rng.gen_range(0.0..1.0);
        assert_eq!(bb.eval(x), f.eval(x));
        assert_eq!(tt.eval(x), f.eval(x));
        assert_eq!(t.eval(x), -f.eval(1.0 - x));
    }
}

#[test]
fn indicial_roots() {
    assert_eq!(indicial_slopes(0.0, 2.0, 0.0).unwrap(), (0.0, 2.0));
    let (m, p) = indicial_slopes(-1.0, 0.0, 0.0).unwrap();
    assert_abs_diff_eq!(m, -1.0, epsilon = 1e-15);
    assert_abs_diff_eq!(p, 1.0, epsilon = 1e-15);
    // logistic example at alpha: qdot = -0.072, h = -0.06
    let (m, p) = indicial_slopes(-0.072, -0.06, 0.0).unwrap();
    assert_abs_diff_eq!(m, -0.30, epsilon = 1e-12);
    assert_abs_diff_eq!(p, 0.24, epsilon = 1e-12);
    assert!(indicial_slopes(0.1, 0.0, 0.0).is_err());
}

/// The logistic example on `(gamma, alpha) = (0.3, 0.6)`: `z = -(0.6-phi)phi(1-phi)`.
fn logistic_middle() -> SingularProblem {
    let cs = common::logistic(0.6, 0.3);
    ThresholdId::C12.canonical(&cs, 0.0).unwrap()
}

#[test]
fn zeta_matches_closed_form() {
    let p = logistic_middle();
    assert_eq!((p.sigma1, p.sigma2), (0.3, 0.6));
    let cfg = SolverConfig::default();
    let z = solve_zeta(&p, &cfg).unwrap();
    assert_abs_diff_eq!(z.eval(0.45), -0.037125, epsilon = 1e-7);
    let exact = |x: f64| -(0.6 - x) * x * (1.0 - x);
    let err = common::max_on(600, 0.3, 0.6, |x| (z.eval(x) - exact(x)).abs());
    assert!(err < 1e-6, "{err}");
    assert_eq!(z.z_hi, 0.0);
    assert_abs_diff_eq!(z.slope_hi, 0.24, epsilon = 1e-4);
    assert!(z.residual(p.q.as_ref(), p.h.as_ref(), p.c) < 1e-6);
}

#[test]
fn larger_speed_lifts_zeta() {
    let p = logistic_middle();
    let cfg = SolverConfig::default();
    let a = solve_zeta(&p, &cfg).unwrap();
    let b = solve_zeta(&p.at_speed(10.0), &cfg).unwrap();
    for s in &a.samples {
        assert!(b.eval(s.phi) > s.z, "at {}", s.phi);
    }
}

/// `q = k (x - s1)(s2 - x)(1 + r x)`, `h = h0 + h1 x`.
fn random_problem<R: Rng>(rng: &mut R) -> SingularProblem {
    let s1: f64 = rng.gen_range(0.0..0.4);
    let s2: f64 = rng.gen_range(0.6..1.0);
    let k: f64 = rng.gen_range(0.2..3.0);
    let r: f64 = rng.gen_range(0.0..2.0);
    let (h0, h1): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    let q: Func = func(move |x| k * (x - s1) * (s2 - x) * (1.0 + r * x));
    let h: Func = func(move |x| h0 + h1 * x);
    SingularProblem::new(q, h, 0.0, s1, s2)
}

fn cstar_of(p: &SingularProblem, cfg: &SolverConfig) -> CStar {
    compute_cstar(&p.q, &p.h, p.sigma1, p.sigma2, cfg).unwrap()
}

#[test]
fn comparison_in_speed_on_random_problems() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = SolverConfig::default();
    for _ in 0..10 {
        let p = random_problem(&mut rng);
        let c1: f64 = rng.gen_range(-2.0..2.0);
        let c2 = c1 + rng.gen_range(0.05..2.0);
        let a = solve_zeta(&p.at_speed(c1), &cfg).unwrap();
        let b = solve_zeta(&p.at_speed(c2), &cfg).unwrap();
        for s in &a.samples {
            assert!(b.eval(s.phi) > s.z, "c {c1} < {c2} at {}", s.phi);
        }
        assert!(a.residual(p.q.as_ref(), p.h.as_ref(), c1) < 1e-6);
    }
}

#[test]
fn zeta_left_vanishes_for_large_speeds() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = SolverConfig::default();
    for _ in 0..3 {
        let p = random_problem(&mut rng);
        let cs = cstar_of(&p, &cfg).value;
        let mut prev = f64::INFINITY;
        for k in 1..=3 {
            let (z, _) = zeta_left(&p.at_speed(cs + 10f64.powi(k)), &cfg).unwrap();
            assert!(z.abs() <= prev, "k = {k}");
            prev = z.abs();
        }
        assert!(prev < 0.1);
    }
}

#[test]
fn slope_at_singular_end_matches_indicial_root() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = SolverConfig::default();
    for _ in 0..5 {
        let p = random_problem(&mut rng).at_speed(rng.gen_range(-1.0..1.0));
        let s2 = p.sigma2;
        let qdot = (p.q.eval(s2) - p.q.eval(s2 - 1e-7)) / 1e-7;
        let (_, m_plus) = indicial_slopes(qdot, p.h.eval(s2), p.c).unwrap();
        let z = solve_zeta(&p, &cfg).unwrap();
        assert_abs_diff_eq!(z.slope_hi, m_plus, epsilon = 1e-4);
    }
}

#[test]
fn cstar_respects_its_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = SolverConfig::default();
    for _ in 0..8 {
        let p = random_problem(&mut rng);
        let c = cstar_of(&p, &cfg);
        assert!(c.value >= p.h.eval(p.sigma1) - cfg.tol);
        assert!(c.value >= c.bounds.lower - cfg.tol);
        assert!(c.value <= c.bounds.upper + cfg.tol);
        if let Some(s) = c.bounds.sharp_upper {
            assert!(c.value <= s + cfg.tol);
        }
        // c* separates the two behaviours of zeta_c(sigma1). Just below a
        // KPP-type c* the left value is exponentially small, so probe lower.
        assert!(!zeta_left(&p.at_speed(c.value - 0.5), &cfg).unwrap().1);
        assert!(zeta_left(&p.at_speed(c.value + 1e-3), &cfg).unwrap().1);
    }
}

#[test]
fn kpp_speed_for_linear_growth() {
    // q = x(1-x), h = 0: the classical minimal speed 2 sqrt(q'(0)) = 2
    let q = func(|x| x * (1.0 - x));
    let h = func(|_| 0.0);
    let c = compute_cstar(&q, &h, 0.0, 1.0, &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(c.value, 2.0, epsilon = 1e-3);
    assert_abs_diff_eq!(c.bounds.lower, 2.0, epsilon = 1e-6);
}

#[test]
fn beta_splits_terminal_values() {
    let p = random_problem(&mut ChaCha8Rng::seed_from_u64(23));
    let cfg = SolverConfig::default();
    let c = cstar_of(&p, &cfg).value + 0.5;
    let beta = compute_beta(&p.q, &p.h, c, p.sigma1, p.sigma2, &cfg).unwrap();
    assert!(beta < 0.0);
    let pc = p.at_speed(c);
    assert!(terminal_left(&pc, 0.5 * beta, &cfg).unwrap().1);
    assert!(!terminal_left(&pc, 2.0 * beta, &cfg).unwrap().1);
    assert!(compute_beta(&p.q, &p.h, c - 1.0, p.sigma1, p.sigma2, &cfg).is_err());
}

#[test]
fn beta_bounds_the_logistic_family() {
    // (alpha, gamma) = (0.3, 0.6): z = (phi-0.3)phi(1-phi) reaches 0.072 at gamma
    let cs = common::logistic(0.3, 0.6);
    let p = ThresholdId::C31.canonical(&cs, 0.0).unwrap();
    let beta = compute_beta(&p.q, &p.h, p.c, p.sigma1, p.sigma2, &SolverConfig::default()).unwrap();
    assert!(beta.abs() >= 0.072, "{beta}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn residual_invariant_holds(seed in 0u64..1000, c in -1.5f64..1.5) {
        let p = random_problem(&mut ChaCha8Rng::seed_from_u64(seed)).at_speed(c);
        let z = solve_zeta(&p, &SolverConfig::default()).unwrap();
        prop_assert!(z.samples.iter().all(|s| s.z < 0.0));
        prop_assert!(z.residual(p.q.as_ref(), p.h.as_ref(), c) < 1e-6);
    }
}
