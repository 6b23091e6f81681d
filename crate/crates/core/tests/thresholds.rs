mod common;

use approx::assert_abs_diff_eq;
use fbwave::coeffs::func;
use fbwave::singular::cstar_bounds;
use fbwave::{compute_cstar, compute_named_thresholds, threshold_bounds, SolverConfig, ThresholdId, Transform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn degenerate_corpus_thresholds_vanish() {
    let cfg = SolverConfig::default();
    let (_, cs) = common::corpus("degenerate_equal");
    let t = compute_named_thresholds(&cs, &cfg).unwrap();
    assert_abs_diff_eq!(t.c11.value, 0.0, epsilon = 1e-3);
    assert_abs_diff_eq!(t.c32.value, 0.0, epsilon = 1e-3);
    assert!(t.c12.is_none() && t.c31.is_none());

    let (_, cs) = common::corpus("degenerate_ordered");
    let t = compute_named_thresholds(&cs, &cfg).unwrap();
    for v in [t.c11.value, t.c31.unwrap().value, t.c32.value] {
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-3);
    }
}

#[test]
fn logistic_thresholds_bracket_zero() {
    let t = compute_named_thresholds(&common::logistic(0.6, 0.3), &SolverConfig::default()).unwrap();
    assert!(t.c11.value < 0.0, "{}", t.c11.value);
    assert!(t.c12.unwrap().value > 0.0);
    assert!(t.c31.is_none());
}

#[test]
fn c32_lower_bound_is_tight_on_the_degenerate_case() {
    let (_, cs) = common::corpus("degenerate_equal");
    let b = threshold_bounds(&cs, ThresholdId::C32, 2048).unwrap().unwrap();
    assert_abs_diff_eq!(cs.h.eval(1.0), 0.0, epsilon = 1e-12);
    assert!(b.lower >= cs.h.eval(1.0) - 1e-9, "{}", b.lower);
    let t = compute_named_thresholds(&cs, &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(t.c32.value, b.lower, epsilon = 1e-3);
}

#[test]
fn zero_flux_lower_bound_is_the_kpp_value() {
    // q'(0) = 3
    let q = func(|x| 3.0 * x * (1.0 - x) * (1.0 + x));
    let h = func(|_| 0.0);
    let b = cstar_bounds(&q, &h, 0.0, 1.0, 2048).unwrap();
    assert_abs_diff_eq!(b.lower, 2.0 * 3f64.sqrt(), epsilon = 1e-5);
}

/// `max_x (1/x) int_0^x q(s)/s ds` by composite Simpson on a fine grid.
fn running_mean_oracle(ratio: impl Fn(f64) -> f64) -> f64 {
    let n = 20_000;
    let dx = 1.0 / n as f64;
    let mut acc = 0.0;
    let mut best = ratio(0.0);
    for i in 0..n {
        let a = i as f64 * dx;
        acc += dx / 6.0 * (ratio(a) + 4.0 * ratio(a + 0.5 * dx) + ratio(a + dx));
        best = f64::max(best, acc / (a + dx));
    }
    best
}

#[test]
fn integral_mean_bound_is_sharper() {
    let h = func(|_| 0.0);
    // q = phi(1 - phi): both bounds equal 2
    let q = func(|x| x * (1.0 - x));
    let b = cstar_bounds(&q, &h, 0.0, 1.0, 2048).unwrap();
    let sharp = b.sharp_upper.unwrap();
    assert_abs_diff_eq!(sharp, 2.0 * running_mean_oracle(|x| 1.0 - x).sqrt(), epsilon = 1e-4);
    assert!(sharp <= b.upper + 1e-9);
    // a strict case: sup of q/x is 4/3, its running mean peaks at 5/4
    let q = func(|x| x * (1.0 - x) * (1.0 + 3.0 * x));
    let b = cstar_bounds(&q, &h, 0.0, 1.0, 2048).unwrap();
    let oracle = running_mean_oracle(|x| (1.0 - x) * (1.0 + 3.0 * x));
    assert_abs_diff_eq!(oracle, 1.25, epsilon = 1e-6);
    assert_abs_diff_eq!(b.sharp_upper.unwrap(), 2.0 * oracle.sqrt(), epsilon = 1e-4);
    assert_abs_diff_eq!(b.upper, 2.0 * (4.0f64 / 3.0).sqrt(), epsilon = 1e-4);
    assert!(b.sharp_upper.unwrap() < b.upper - 0.05);
}

#[test]
fn thresholds_lie_in_their_sandwich() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let slack = 1e-6 + cfg.tol;
    for _ in 0..50 {
        let poly = common::random_poly(&mut rng);
        let cs = poly.coefficients();
        let t = compute_named_thresholds(&cs, &cfg).unwrap();
        for id in [ThresholdId::C11, ThresholdId::C12, ThresholdId::C31, ThresholdId::C32] {
            let Some(th) = t.get(id) else { continue };
            if !th.value.is_finite() {
                continue;
            }
            assert!(th.value >= th.lower - slack, "{poly:?} {id:?} {th:?}");
            assert!(th.value <= th.best_upper() + slack, "{poly:?} {id:?} {th:?}");
        }
    }
}

#[test]
fn increasing_drift_lifts_cstar_above_its_start() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..6 {
        let k: f64 = rng.gen_range(0.2..2.0);
        let h1: f64 = rng.gen_range(0.2..1.5);
        let h0: f64 = rng.gen_range(-1.0..1.0);
        let q = func(move |x| k * x * (1.0 - x));
        let h = func(move |x| h0 + h1 * x);
        let c = compute_cstar(&q, &h, 0.0, 1.0, &cfg).unwrap();
        assert!(c.value - h0 > 1e-3, "c* = {} h(0) = {h0}", c.value);
    }
}

#[test]
fn c11_matches_a_hand_built_transform() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..3 {
        let cs = common::random_poly(&mut rng).coefficients();
        let named = compute_named_thresholds(&cs, &cfg).unwrap().c11.value;
        let qt = Transform::Tilde.function(cs.q_func());
        let ht = Transform::Tilde.function(cs.h.clone());
        let lo = 1.0 - cs.alpha.min(cs.gamma);
        let direct = -compute_cstar(&qt, &ht, lo, 1.0, &cfg).unwrap().value;
        assert_abs_diff_eq!(named, direct, epsilon = 2.0 * cfg.tol);
    }
}
