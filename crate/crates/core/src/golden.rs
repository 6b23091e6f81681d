//! The bundled reference corpus and its runner.

use serde::Serialize;

use crate::coeffs::{validate_problem, CoefficientSet, Function};
use crate::problem_file::ProblemFile;
use crate::profile::{classify_at_alpha, insert_plateau, reconstruct_profile, residual, Anchor};
use crate::speeds::{admissible_speeds, direct_z, solve_z_for_speed, GluedZ, Selector, SpeedReport, SpeedSet};

pub const CORPUS: &[(&str, &str)] = &[
    ("logistic_front", include_str!("../../../golden/logistic_front.json")),
    ("logistic_family", include_str!("../../../golden/logistic_family.json")),
    ("degenerate_equal", include_str!("../../../golden/degenerate_equal.json")),
    ("degenerate_ordered", include_str!("../../../golden/degenerate_ordered.json")),
    ("negative_plateau", include_str!("../../../golden/negative_plateau.json")),
    ("negative_branch", include_str!("../../../golden/negative_branch.json")),
];

/// Residual bound on the reconstructed profile where `|D| > 1e-3`.
pub const RESIDUAL_BOUND: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Observed deviation, or the observed value for yes/no checks.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub bound: f64,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub checks: Vec<Check>,
}

impl CaseOutcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn within(&mut self, name: &str, dev: f64, bound: f64) {
        self.checks.push(Check { name: name.into(), passed: dev <= bound, value: dev, bound, note: String::new() });
    }

    fn flag(&mut self, name: &str, ok: bool, note: String) {
        let v = if ok { 1.0 } else { 0.0 };
        self.checks.push(Check { name: name.into(), passed: ok, value: v, bound: 1.0, note });
    }
}

fn max_error(z: &GluedZ, exact: &dyn Function) -> f64 {
    (1..4000).map(|i| i as f64 / 4000.0).map(|x| (z.eval(x) - exact.eval(x)).abs()).fold(0.0, f64::max)
}

fn set_kind(j: &SpeedSet) -> &'static str {
    match j {
        SpeedSet::Empty => "empty",
        SpeedSet::Singleton { .. } => "singleton",
        SpeedSet::Interval { .. } => "interval",
    }
}

/// Run every expectation of one problem file.
pub fn run_case(name: &str, pf: &ProblemFile) -> CaseOutcome {
    let mut out = CaseOutcome { name: name.into(), checks: Vec::new() };
    let cs = match pf.coefficients() {
        Ok(cs) => cs,
        Err(e) => {
            out.flag("parse", false, e.to_string());
            return out;
        }
    };
    let cfg = pf.config();
    let Some(ex) = pf.expect.clone() else { return out };
    let mut report: Option<SpeedReport> = None;
    if !pf.direct {
        let v = validate_problem(&cs, cfg.grid);
        let failed: Vec<_> = v.failures().map(|f| f.name.clone()).collect();
        out.flag("assumptions", failed.is_empty(), failed.join("; "));
        match admissible_speeds(&cs, &cfg) {
            Ok(r) => report = Some(r),
            Err(e) => {
                out.flag("speeds", false, e.to_string());
                return out;
            }
        }
    }
    if let Some(r) = &report {
        for (key, want) in &ex.thresholds {
            let got = match key.as_str() {
                "c11" => Some(r.thresholds.c11.value),
                "c12" => r.thresholds.c12.map(|t| t.value),
                "c31" => r.thresholds.c31.map(|t| t.value),
                "c32" => Some(r.thresholds.c32.value),
                _ => None,
            };
            out.within(&format!("thresholds.{key}"), got.map_or(f64::INFINITY, |g| (g - want).abs()), ex.speed_tol);
        }
        if let Some(j) = &ex.j {
            let kind = set_kind(&r.j);
            out.flag("J.kind", kind == j.kind, format!("got {kind}"));
            let hull = r.j.hull();
            for (label, want, got) in [("J.lo", j.lo, hull.map(|h| h.0)), ("J.hi", j.hi, hull.map(|h| h.1))] {
                if let Some(w) = want {
                    out.within(label, got.map_or(f64::INFINITY, |g| (g - w).abs()), ex.speed_tol);
                }
            }
        }
    }
    let Some(c) = ex.speed else { return out };
    let selector = ex.lambda.map_or(Selector::Canonical, Selector::Lambda);
    let z = match &report {
        Some(r) => solve_z_for_speed(&cs, r, c, selector, &cfg),
        None => direct_z(&cs, c, selector, &cfg),
    };
    let z = match z {
        Ok(z) => z,
        Err(e) => {
            out.flag("z", false, e.to_string());
            return out;
        }
    };
    if let Some(src) = &ex.z {
        match src.to_formula() {
            Ok(f) => out.within("z", max_error(&z, &f), ex.z_tol),
            Err(e) => out.flag("z", false, e.to_string()),
        }
    }
    profile_checks(&mut out, &cs, &z, c, report.as_ref(), &ex);
    out
}

fn profile_checks(
    out: &mut CaseOutcome,
    cs: &CoefficientSet,
    z: &GluedZ,
    c: f64,
    report: Option<&SpeedReport>,
    ex: &crate::problem_file::Expectations,
) {
    let p = match reconstruct_profile(cs, z, c, Some(Anchor::default_for(cs))) {
        Ok(p) => p,
        Err(e) => {
            out.flag("profile", false, e.to_string());
            return;
        }
    };
    out.within("profile.residual", residual(&p, cs, c).max, RESIDUAL_BOUND);
    if let (Some(want), Some(r)) = (ex.slope_alpha, report) {
        let got = classify_at_alpha(cs, c, r).ok().and_then(|k| k.kind.value());
        out.within("slope_alpha", got.map_or(f64::INFINITY, |g| (g - want).abs()), ex.slope_tol);
    }
    if let Some(want) = ex.plateau {
        let got = insert_plateau(&p, 0.5, 0.5);
        let note = match &got {
            Ok(_) => "accepted".to_string(),
            Err(e) => e.to_string(),
        };
        out.flag("plateau", got.is_ok() == want, note);
    }
}

/// Run the whole bundled corpus, in a fixed order.
pub fn run_golden() -> Vec<CaseOutcome> {
    CORPUS
        .iter()
        .map(|(name, src)| match ProblemFile::from_json(src) {
            Ok(pf) => run_case(name, &pf),
            Err(e) => {
                let mut o = CaseOutcome { name: (*name).into(), checks: Vec::new() };
                o.flag("parse", false, e.to_string());
                o
            }
        })
        .collect()
}
