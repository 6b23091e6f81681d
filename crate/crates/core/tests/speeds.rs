mod common;

use approx::assert_abs_diff_eq;
use fbwave::coeffs::{Formula, Function};
use fbwave::speeds::{family_at, gamma_mismatch, Case, Selector};
use fbwave::{admissible_speeds, compute_named_thresholds, solve_c1star, solve_z_for_speed, GluedZ, SolverConfig, SpeedSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn max_error(z: &GluedZ, exact: impl Fn(f64) -> f64) -> f64 {
    common::max_on(3000, 1e-4, 1.0 - 1e-4, |x| (z.eval(x) - exact(x)).abs())
}

fn expected_z(name: &str) -> Formula {
    let (pf, _) = common::corpus(name);
    pf.expect.unwrap().z.unwrap().to_formula().unwrap()
}

#[test]
fn gluing_speed_of_the_logistic_front() {
    let c = solve_c1star(&common::logistic(0.6, 0.3), &SolverConfig::default()).unwrap();
    assert_abs_diff_eq!(c, 0.0, epsilon = 1e-3);
    assert!(solve_c1star(&common::logistic(0.3, 0.6), &SolverConfig::default()).is_err());
}

#[test]
fn mismatch_changes_sign_and_decreases() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut seen = 0;
    let mut instances = vec![common::logistic(0.6, 0.3)];
    instances.extend((0..6).map(|_| {
        let mut p = common::random_concave(&mut rng);
        if p.alpha < p.gamma {
            std::mem::swap(&mut p.alpha, &mut p.gamma);
        }
        p.coefficients()
    }));
    for cs in instances {
        let t = compute_named_thresholds(&cs, &cfg).unwrap();
        let (c11, c12) = (t.c11.value, t.c12.unwrap().value);
        if !(c11.is_finite() && c12.is_finite() && c11 < c12) {
            continue;
        }
        seen += 1;
        let e = 1e-3 * (c12 - c11);
        assert!(gamma_mismatch(&cs, c11 + e, &cfg).unwrap() > 0.0);
        assert!(gamma_mismatch(&cs, c12 - e, &cfg).unwrap() < 0.0);
        let (ca, cb) = (c11 + 0.3 * (c12 - c11), c11 + 0.7 * (c12 - c11));
        assert!(gamma_mismatch(&cs, ca, &cfg).unwrap() > gamma_mismatch(&cs, cb, &cfg).unwrap());
    }
    assert!(seen >= 4, "only {seen} instances with c11 < c12");
}

#[test]
fn admissible_sets_of_the_reference_cases() {
    let cfg = SolverConfig::default();
    let sets = [
        ("degenerate_equal", common::corpus("degenerate_equal").1),
        ("degenerate_ordered", common::corpus("degenerate_ordered").1),
        ("logistic", common::logistic(0.6, 0.3)),
    ];
    for (name, cs) in sets {
        let r = admissible_speeds(&cs, &cfg).unwrap();
        match r.j {
            SpeedSet::Singleton { c } => assert_abs_diff_eq!(c, 0.0, epsilon = 1e-3),
            other => panic!("{name}: {other:?}"),
        }
    }
}

#[test]
fn glued_solutions_match_closed_forms() {
    let cfg = SolverConfig::default();
    let cs = common::logistic(0.6, 0.3);
    let r = admissible_speeds(&cs, &cfg).unwrap();
    let z = solve_z_for_speed(&cs, &r, 0.0, Selector::Canonical, &cfg).unwrap();
    assert!(max_error(&z, |x| -(0.6 - x) * x * (1.0 - x)) < 1e-4);

    let (_, cs) = common::corpus("degenerate_ordered");
    let r = admissible_speeds(&cs, &cfg).unwrap();
    let z = solve_z_for_speed(&cs, &r, 0.0, Selector::Lambda(0.0), &cfg).unwrap();
    let exact = expected_z("degenerate_ordered");
    assert!(max_error(&z, |x| exact.eval(x)) < 1e-4);

    // z(gamma) = 0.072 with D(0.6) = -0.3
    let cs = common::logistic(0.3, 0.6);
    let r = admissible_speeds(&cs, &cfg).unwrap();
    let z = solve_z_for_speed(&cs, &r, 0.0, Selector::Lambda(0.072 / -0.3), &cfg).unwrap();
    assert!(max_error(&z, |x| (x - 0.3) * x * (1.0 - x)) < 1e-4);
    assert_abs_diff_eq!(z.z_gamma, 0.072, epsilon = 1e-6);
}

#[test]
fn out_of_set_speeds_are_refused() {
    let cfg = SolverConfig::default();
    let cs = common::logistic(0.6, 0.3);
    let r = admissible_speeds(&cs, &cfg).unwrap();
    assert!(matches!(
        solve_z_for_speed(&cs, &r, 0.5, Selector::Canonical, &cfg),
        Err(fbwave::Error::NotAdmissible { .. })
    ));
}

fn sign_pattern_holds(z: &GluedZ, alpha: f64, gamma: f64) -> bool {
    z.pieces.iter().flat_map(|p| p.samples.iter()).all(|s| {
        if s.phi < alpha {
            s.z < 0.0
        } else if s.phi > alpha && (z.z_gamma != 0.0 || (s.phi - gamma).abs() > 1e-9) {
            s.z > 0.0
        } else {
            true
        }
    })
}

/// One-sided slopes of `z` at `gamma` from the adjacent pieces.
fn slopes_at_gamma(z: &GluedZ, gamma: f64) -> (f64, f64) {
    let left = z.pieces.iter().find(|p| (p.hi - gamma).abs() < 1e-12).unwrap().slope_hi;
    let right = z.pieces.iter().find(|p| (p.lo - gamma).abs() < 1e-12).unwrap().slope_lo;
    (left, right)
}

#[test]
fn sets_are_bounded_intervals_inside_the_drift_range() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut intervals = 0;
    for _ in 0..12 {
        let p = common::random_concave(&mut rng);
        let cs = p.coefficients();
        let r = admissible_speeds(&cs, &cfg).unwrap();
        match r.case {
            Case::AlphaGtGamma => assert!(!matches!(r.j, SpeedSet::Interval { .. })),
            _ => {
                let SpeedSet::Interval { lo, hi, .. } = r.j else { continue };
                intervals += 1;
                assert!(lo.is_finite() && hi.is_finite());
                assert!(lo >= cs.h.eval(1.0) - cfg.tol && hi <= cs.h.eval(cs.alpha) + cfg.tol, "{p:?}");
                for k in 1..6 {
                    let c = lo + (hi - lo) * k as f64 / 6.0;
                    let z = solve_z_for_speed(&cs, &r, c, Selector::Canonical, &cfg)
                        .unwrap_or_else(|e| panic!("{p:?} at {c}: {e}"));
                    assert!(sign_pattern_holds(&z, cs.alpha, cs.gamma), "{p:?} at {c}");
                }
            }
        }
    }
    assert!(intervals >= 3, "only {intervals} intervals");
}

#[test]
fn family_members_are_ordered_and_match_slopes_at_gamma() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut done = 0;
    while done < 3 {
        let p = common::random_concave(&mut rng);
        let cs = p.coefficients();
        let r = admissible_speeds(&cs, &cfg).unwrap();
        let SpeedSet::Interval { lo, hi, .. } = r.j else { continue };
        let c = 0.5 * (lo + hi);
        let fam = family_at(&cs, c, &cfg).unwrap();
        assert!(fam.lambda_c < 0.0);
        let lambdas = [0.9 * fam.lambda_c, 0.5 * fam.lambda_c, 0.1 * fam.lambda_c];
        let zs: Vec<GluedZ> = lambdas
            .iter()
            .map(|&l| solve_z_for_speed(&cs, &r, c, Selector::Lambda(l), &cfg).unwrap())
            .collect();
        // a steeper crossing carries a larger flux on (alpha, 1); the
        // members merge exponentially fast towards alpha
        for i in 1..200 {
            let x = cs.alpha + (1.0 - cs.alpha) * i as f64 / 200.0;
            let v: Vec<f64> = zs.iter().map(|z| z.eval(x)).collect();
            assert!(v[0] >= v[1] - 1e-9 && v[1] >= v[2] - 1e-9, "{p:?} at {x}: {v:?}");
        }
        let at_gamma: Vec<f64> = zs.iter().map(|z| z.z_gamma).collect();
        assert!(at_gamma[0] > at_gamma[1] && at_gamma[1] > at_gamma[2]);
        for z in &zs {
            let (l, rr) = slopes_at_gamma(z, cs.gamma);
            assert!((l - rr).abs() <= 1e-3, "{l} vs {rr}");
            assert_abs_diff_eq!(l, cs.h.eval(cs.gamma) - c, epsilon = 1e-3);
        }
        done += 1;
    }
}

#[test]
fn convex_flux_with_alpha_below_gamma_has_no_waves() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let mut p = common::random_convex(&mut rng);
        if p.alpha > p.gamma {
            std::mem::swap(&mut p.alpha, &mut p.gamma);
        }
        let r = admissible_speeds(&p.coefficients(), &cfg).unwrap();
        assert!(r.j.is_empty(), "{p:?}: {:?}", r.j);
    }
}

#[test]
fn alpha_above_gamma_gives_at_most_one_speed() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..8 {
        let mut p = if rng.gen_bool(0.5) { common::random_concave(&mut rng) } else { common::random_poly(&mut rng) };
        if p.alpha < p.gamma {
            std::mem::swap(&mut p.alpha, &mut p.gamma);
        }
        let r = admissible_speeds(&p.coefficients(), &cfg).unwrap();
        assert!(matches!(r.j, SpeedSet::Empty | SpeedSet::Singleton { .. }), "{p:?}");
    }
}
