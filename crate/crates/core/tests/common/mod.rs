#![allow(dead_code)]

use fbwave::{CoefficientSet, ProblemFile};
use rand::Rng;

pub fn corpus(name: &str) -> (ProblemFile, CoefficientSet) {
    let src = fbwave::golden::CORPUS.iter().find(|(n, _)| *n == name).expect("corpus entry").1;
    let pf = ProblemFile::from_json(src).unwrap();
    let cs = pf.coefficients().unwrap();
    (pf, cs)
}

/// `f = -phi^3 + (2a+1)/2 phi^2 + (g-a) phi`, `D = a - phi`,
/// `g = phi(1-phi)(phi-g)`: the profile is `1/(e^xi + 1)` at `c = 0`.
pub fn logistic(a: f64, g: f64) -> CoefficientSet {
    CoefficientSet::from_expressions(
        &format!("-phi^3 + {}*phi^2 + {}*phi", (2.0 * a + 1.0) / 2.0, g - a),
        &format!("{a} - phi"),
        &format!("phi*(1-phi)*(phi-{g})"),
        a,
        g,
    )
    .unwrap()
}

#[derive(Debug, Clone, Copy)]
pub struct Poly {
    pub alpha: f64,
    pub gamma: f64,
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub f: [f64; 3],
}

impl Poly {
    pub fn coefficients(&self) -> CoefficientSet {
        let Poly { alpha, gamma, a, b, f } = *self;
        CoefficientSet::from_expressions(
            &format!("{}*phi + {}*phi^2 + {}*phi^3", f[0], f[1], f[2]),
            &format!("({alpha} - phi)*({} + {}*phi)", a[0], a[1]),
            &format!("phi*(1-phi)*(phi-{gamma})*({} + {}*phi)", b[0], b[1]),
            alpha,
            gamma,
        )
        .unwrap()
    }
}

/// `D = (alpha - phi)(a0 + a1 phi)`, `g = phi(1-phi)(phi-gamma)(b0 + b1 phi)`
/// with positive factors, and a cubic flux.
pub fn random_poly<R: Rng>(rng: &mut R) -> Poly {
    let alpha: f64 = rng.gen_range(0.2..0.8);
    let mut gamma: f64 = rng.gen_range(0.2..0.8);
    while (gamma - alpha).abs() < 0.05 {
        gamma = rng.gen_range(0.2..0.8);
    }
    Poly {
        alpha,
        gamma,
        a: [rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.0)],
        b: [rng.gen_range(0.5..2.0), rng.gen_range(0.0..1.0)],
        f: [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-0.5..0.5)],
    }
}

/// Same family with a convex quadratic flux `k phi^2 + m phi`.
pub fn random_convex<R: Rng>(rng: &mut R) -> Poly {
    let mut p = random_poly(rng);
    p.f = [rng.gen_range(-1.0..1.0), rng.gen_range(0.0..1.0), 0.0];
    p
}

pub fn max_on(n: usize, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).map(f).fold(0.0, f64::max)
}

/// Same family with the strongly concave flux `K phi(1 - phi)`, which
/// carries wavefronts for every ordering of `alpha` and `gamma`.
pub fn random_concave<R: Rng>(rng: &mut R) -> Poly {
    let mut p = random_poly(rng);
    let k = rng.gen_range(2.0..8.0);
    p.f = [k, -k, 0.0];
    p
}

/// Flux `D(phi) phi'` at a sample.
pub fn flux(cs: &CoefficientSet, s: &fbwave::profile::ProfileSample) -> f64 {
    cs.d.eval(s.phi) * s.dphi
}

/// Violations of the profile invariants: range and monotonicity, strictly
/// negative slope away from the special levels, flux continuity across
/// `xi_alpha`, vanishing flux at both ends, and the strong residual.
pub fn profile_violations(p: &fbwave::ProfileCurve, cs: &CoefficientSet, c: f64) -> Vec<String> {
    let mut out = Vec::new();
    let s = &p.samples;
    let special = [0.0, cs.alpha, cs.gamma, 1.0];
    for (i, q) in s.iter().enumerate() {
        if !(0.0..=1.0).contains(&q.phi) {
            out.push(format!("phi = {} out of range", q.phi));
        }
        if i > 0 && (q.phi > s[i - 1].phi + 1e-12 || q.xi < s[i - 1].xi) {
            out.push(format!("not monotone at xi = {}", q.xi));
        }
        if special.iter().all(|l| (q.phi - l).abs() > 1e-9) && !(q.dphi < 0.0) {
            out.push(format!("phi' = {} at phi = {}", q.dphi, q.phi));
        }
    }
    if let Some(j) = p.junction(fbwave::profile::Location::Alpha) {
        if j.finite() {
            let above: Vec<_> = s.iter().filter(|q| q.phi > cs.alpha && q.xi < j.xi_minus).collect();
            let below: Vec<_> = s.iter().filter(|q| q.phi < cs.alpha && q.xi > j.xi_plus).collect();
            if above.len() >= 2 && below.len() >= 2 {
                let lin = |a: &fbwave::profile::ProfileSample, b: &fbwave::profile::ProfileSample, x: f64| {
                    let (va, vb) = (flux(cs, a), flux(cs, b));
                    va + (vb - va) * (x - a.xi) / (b.xi - a.xi)
                };
                let n = above.len();
                let vm = lin(above[n - 2], above[n - 1], j.xi_minus);
                let vp = lin(below[0], below[1], j.xi_plus);
                if (vm - vp).abs() > 1e-4 {
                    out.push(format!("flux jumps at xi_alpha: {vm} vs {vp}"));
                }
            }
        }
    }
    for q in [&s[0], &s[s.len() - 1]] {
        if flux(cs, q).abs() > 1e-4 {
            out.push(format!("end flux {} at phi = {}", flux(cs, q), q.phi));
        }
    }
    let r = fbwave::residual(p, cs, c);
    if !(r.max <= 1e-5) {
        out.push(format!("residual {} at xi = {}", r.max, r.at));
    }
    out
}
