mod common;

use approx::assert_abs_diff_eq;
use fbwave::conditions::{
    check_g_growth, check_necessary_convex, check_sufficient_concave, check_sufficient_convex, is_convex, Holds,
};
use fbwave::{admissible_speeds, CoefficientSet, Formula, SolverConfig, SpeedSet};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `g = sign(phi - 1/2) |phi - 1/2|^t phi (1 - phi)`.
fn root_g(t: f64) -> Formula {
    Formula::piecewise(&[
        (Some(0.5), &format!("-(0.5-phi)^{t}*phi*(1-phi)")),
        (None, &format!("(phi-0.5)^{t}*phi*(1-phi)")),
    ])
    .unwrap()
}

fn with_root_g(f: &str, d: &str, t: f64, alpha: f64) -> CoefficientSet {
    CoefficientSet::from_formulas(Some(Formula::parse(f).unwrap()), Formula::parse(d).unwrap(), root_g(t), None, alpha, 0.5)
        .unwrap()
}

#[test]
fn growth_of_g_at_gamma() {
    let flags = check_g_growth(&common::logistic(0.6, 0.3));
    assert!(flags.sublinear_left && flags.sublinear_right);
    assert!(!flags.integrability);

    let (_, cs) = common::corpus("negative_plateau");
    let flags = check_g_growth(&cs);
    assert!(!flags.sublinear_left && !flags.sublinear_right);
    assert!(flags.integrability);
    assert_abs_diff_eq!(flags.tau.unwrap(), 0.5, epsilon = 0.02);

    let cs = with_root_g("0", "0.5 - phi", 0.3, 0.5);
    let flags = check_g_growth(&cs);
    assert!(flags.integrability);
    assert_abs_diff_eq!(flags.tau.unwrap(), 0.3, epsilon = 0.02);
    // the bound |g| >= L |phi - gamma|^tau at the fitted L
    let (tau, l) = (flags.tau.unwrap(), flags.l.unwrap());
    for i in 1..=100 {
        let d = 1e-2 * i as f64 / 100.0;
        for x in [0.5 - d, 0.5 + d] {
            assert!(cs.g.eval(x).abs() >= l * d.powf(tau) * (1.0 - 1e-9), "at {x}");
        }
    }
}

/// `int_0^alpha q` by the midpoint rule on a million cells.
fn rectangle_oracle(cs: &CoefficientSet) -> f64 {
    let n = 1_000_000;
    let h = cs.alpha / n as f64;
    (0..n).map(|i| cs.q((i as f64 + 0.5) * h)).sum::<f64>() * h
}

#[test]
fn necessary_convex_condition() {
    let cs = CoefficientSet::from_expressions("0", "0.6 - phi", "phi*(1-phi)*(phi-0.3)", 0.6, 0.3).unwrap();
    let r = check_necessary_convex(&cs);
    let oracle = rectangle_oracle(&cs);
    let got = r.quantities["integral_Dg_0_alpha"];
    assert_abs_diff_eq!(got, oracle, epsilon = 1e-10);
    assert_eq!(r.holds, if oracle > 0.0 { Holds::Yes } else { Holds::No });

    // gamma >= alpha: Dg <= 0 on (0, alpha)
    let cs = CoefficientSet::from_expressions("0", "0.3 - phi", "phi*(1-phi)*(phi-0.6)", 0.3, 0.6).unwrap();
    assert_eq!(check_necessary_convex(&cs).holds, Holds::No);

    // a linear flux leaves the criterion unchanged
    let a = CoefficientSet::from_expressions("0", "0.6 - phi", "phi*(1-phi)*(phi-0.2)", 0.6, 0.2).unwrap();
    let b = CoefficientSet::from_expressions("-0.7*phi", "0.6 - phi", "phi*(1-phi)*(phi-0.2)", 0.6, 0.2).unwrap();
    let (ra, rb) = (check_necessary_convex(&a), check_necessary_convex(&b));
    assert_eq!(ra.holds, rb.holds);
    assert_eq!(ra.slack, rb.slack);

    let concave = common::logistic(0.6, 0.3);
    assert!(!is_convex(concave.f.as_ref()));
    assert_eq!(check_necessary_convex(&concave).holds, Holds::Undecidable);
}

#[test]
fn sufficient_convex_with_vanishing_sigma() {
    // linear f and D = 0 on [alpha, 1]: Sigma = 0 and the bound is zero
    let d = Formula::piecewise(&[(Some(0.6), "0.6 - phi"), (None, "0")]).unwrap();
    let g = Formula::parse("phi*(1-phi)*(phi-0.3)").unwrap();
    let cs = CoefficientSet::from_formulas(Some(Formula::parse("0.4*phi").unwrap()), d, g, None, 0.6, 0.3).unwrap();
    let r = check_sufficient_convex(&cs, 2048);
    assert_eq!(r.quantities["Sigma"], 0.0);
    assert_eq!(r.quantities["rhs"], 0.0);
    assert_eq!(r.slack, Some(r.quantities["integral_Dg_0_alpha"]));
    assert_eq!(r.holds, check_necessary_convex(&cs).holds);
}

/// `f = 0.01 phi^2`, `D = kappa (0.8 - phi)(1 - phi)^2`, `g = phi(1-phi)(phi-0.1)`.
fn kappa_instance(kappa: f64) -> CoefficientSet {
    CoefficientSet::from_expressions(
        "0.01*phi^2",
        &format!("{kappa}*(0.8-phi)*(1-phi)^2"),
        "phi*(1-phi)*(phi-0.1)",
        0.8,
        0.1,
    )
    .unwrap()
}

/// Both sides at `kappa = 1` by brute force; the integral, the supremum
/// and the maximum all scale linearly in `kappa`.
fn kappa_oracle() -> impl Fn(f64) -> f64 {
    let cs = kappa_instance(1.0);
    let integral = rectangle_oracle(&cs);
    let n = 400_000;
    let sup = (0..n)
        .map(|i| 0.8 + 0.2 * i as f64 / n as f64)
        .map(|x| cs.q(x) / (x - 1.0))
        .fold(f64::NEG_INFINITY, f64::max);
    let m = (0..=n).map(|i| -cs.q(0.1 * i as f64 / n as f64)).fold(f64::NEG_INFINITY, f64::max);
    move |k: f64| {
        let sigma = 0.02 + 2.0 * (k * sup).sqrt();
        k * integral - 2.0 * 0.64 * sigma / 3.0 * (sigma + (sigma * sigma + 2.0 * k * m / 0.8).sqrt())
    }
}

fn bisect(mut lo: f64, mut hi: f64, pass: impl Fn(f64) -> bool) -> f64 {
    assert!(!pass(lo) && pass(hi));
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if pass(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[test]
fn sufficient_convex_flips_along_a_scaled_family() {
    let oracle = kappa_oracle();
    let want = bisect(1.0, 1000.0, |k| oracle(k) >= 0.0);
    let got = bisect(1.0, 1000.0, |k| check_sufficient_convex(&kappa_instance(k), 2048).holds == Holds::Yes);
    assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");

    let cs = kappa_instance(2.0 * got);
    let cfg = SolverConfig::default();
    let r = admissible_speeds(&cs, &cfg).unwrap();
    let SpeedSet::Singleton { c } = r.j else { panic!("{:?}", r.j) };
    assert!(c > cs.h.eval(0.8));
}

#[test]
fn sufficient_concave_cases() {
    // alpha > gamma with a differentiable g: evaluable
    let r = check_sufficient_concave(&CoefficientSet::from_expressions("3*phi*(1-phi)", "0.6 - phi", "phi*(1-phi)*(phi-0.3)", 0.6, 0.3).unwrap(), 2048);
    assert_ne!(r.holds, Holds::Undecidable);
    assert!(r.slack.is_some() && r.quantities.contains_key("g_dot_gamma"));
    // a square-root g has no slope at gamma
    let r = check_sufficient_concave(&with_root_g("3*phi*(1-phi)", "0.7 - phi", 0.5, 0.7), 2048);
    assert_eq!(r.holds, Holds::Undecidable);

    // alpha = gamma needs the integrability condition
    let cs = CoefficientSet::from_expressions("2*phi*(1-phi)", "0.5 - phi", "phi*(1-phi)*(phi-0.5)", 0.5, 0.5).unwrap();
    assert_eq!(check_sufficient_concave(&cs, 2048).holds, Holds::Undecidable);
    let cs = with_root_g("4*phi*(1-phi)", "0.5 - phi", 0.5, 0.5);
    let r = check_sufficient_concave(&cs, 2048);
    assert_eq!(r.holds, Holds::Yes);
    // then the admissible set does not collapse to a point
    let j = admissible_speeds(&cs, &SolverConfig::default()).unwrap().j;
    let (lo, hi) = j.hull().unwrap();
    assert!(hi - lo > 0.1, "{j:?}");
}

/// `f = K phi(1 - phi)`, `D = 0.3 - phi`, `g = phi(1-phi)(phi-0.6)(1 + phi)`.
fn concave_k(k: f64) -> CoefficientSet {
    CoefficientSet::from_expressions(&format!("{k}*phi*(1-phi)"), "0.3 - phi", "phi*(1-phi)*(phi-0.6)*(1+phi)", 0.3, 0.6)
        .unwrap()
}

#[test]
fn sufficient_concave_flips_in_the_flux_scale() {
    // left side K (1 - gamma); right side 2 (sqrt sup d(q, 1) + sqrt sup d(q, alpha))
    let cs = concave_k(1.0);
    let n = 400_000;
    let s1 = (0..n).map(|i| 0.6 + 0.4 * i as f64 / n as f64).map(|x| cs.q(x) / (x - 1.0)).fold(f64::NEG_INFINITY, f64::max);
    let s2 = (1..n)
        .map(|i| 0.6 * i as f64 / n as f64)
        .filter(|x| (x - 0.3).abs() > 1e-9)
        .map(|x| cs.q(x) / (x - 0.3))
        .fold(f64::NEG_INFINITY, f64::max);
    let want = 2.0 * (s1.max(0.0).sqrt() + s2.max(0.0).sqrt()) / 0.4;
    let got = bisect(0.1, 100.0, |k| check_sufficient_concave(&concave_k(k), 2048).holds == Holds::Yes);
    assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");
    let r = admissible_speeds(&concave_k(1.5 * got), &SolverConfig::default()).unwrap();
    assert!(!r.j.is_empty());
}

#[test]
fn sufficient_conditions_are_sound() {
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let mut passed = 0;
    for i in 0..24 {
        let poly = if i % 2 == 0 { common::random_concave(&mut rng) } else { common::random_convex(&mut rng) };
        let cs = poly.coefficients();
        let holds = [check_sufficient_convex(&cs, 2048), check_sufficient_concave(&cs, 2048)]
            .iter()
            .any(|r| r.holds == Holds::Yes);
        let r = admissible_speeds(&cs, &cfg).unwrap();
        if holds {
            passed += 1;
            assert!(!r.j.is_empty(), "{poly:?}");
        }
        if is_convex(cs.f.as_ref()) {
            if let Some((lo, _)) = r.j.hull() {
                assert_eq!(check_necessary_convex(&cs).holds, Holds::Yes, "{poly:?}");
                assert!(lo > cs.h.eval(cs.alpha), "{poly:?}");
            }
        }
    }
    assert!(passed >= 3, "{passed}");
}
