use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::function::{Antiderivative, Formula, Func};
use crate::error::{Error, Result};

/// Flux `f`, its derivative `h`, diffusivity `D` with derivative, reaction
/// `g`, and the sign-change points `alpha` of `D` and `gamma` of `g`.
#[derive(Clone)]
pub struct CoefficientSet {
    pub f: Func,
    pub h: Func,
    pub d: Func,
    pub d_dot: Func,
    pub g: Func,
    pub alpha: f64,
    pub gamma: f64,
    /// Source formulas when the set was built from expressions.
    pub formulas: Option<Formulas>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Formulas {
    pub f: Option<Formula>,
    pub h: Option<Formula>,
    pub d: Formula,
    pub g: Formula,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("alpha", &self.alpha)
            .field("gamma", &self.gamma)
            .field("formulas", &self.formulas)
            .finish()
    }
}

impl CoefficientSet {
    /// Build from formulas. `h` defaults to the symbolic derivative of `f`;
    /// when only `h` is given, `f` is its antiderivative vanishing at 0.
    pub fn from_formulas(
        f: Option<Formula>,
        d: Formula,
        g: Formula,
        h: Option<Formula>,
        alpha: f64,
        gamma: f64,
    ) -> Result<CoefficientSet> {
        let h_formula = match (&h, &f) {
            (Some(h), _) => h.clone(),
            (None, Some(f)) => f.differentiate(),
            (None, None) => {
                return Err(Error::InvalidProblem("either f or h must be given".into()))
            }
        };
        let h_func = h_formula.to_func();
        let f_func: Func = match &f {
            Some(f) => f.to_func(),
            None => Arc::new(Antiderivative::new(h_func.clone(), 4096)),
        };
        Ok(CoefficientSet {
            f: f_func,
            h: h_func,
            d: d.to_func(),
            d_dot: d.differentiate().to_func(),
            g: g.to_func(),
            alpha,
            gamma,
            formulas: Some(Formulas { f, h, d, g }),
        })
    }

    pub fn from_expressions(f: &str, d: &str, g: &str, alpha: f64, gamma: f64) -> Result<Self> {
        CoefficientSet::from_formulas(
            Some(Formula::parse(f)?),
            Formula::parse(d)?,
            Formula::parse(g)?,
            None,
            alpha,
            gamma,
        )
    }

    pub fn from_functions(
        f: Func,
        h: Func,
        d: Func,
        d_dot: Func,
        g: Func,
        alpha: f64,
        gamma: f64,
    ) -> CoefficientSet {
        CoefficientSet { f, h, d, d_dot, g, alpha, gamma, formulas: None }
    }

    pub fn q(&self, x: f64) -> f64 {
        self.d.eval(x) * self.g.eval(x)
    }

    pub fn q_func(&self) -> Func {
        let d = self.d.clone();
        let g = self.g.clone();
        Arc::new(move |x: f64| d.eval(x) * g.eval(x))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub first_violation: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &AssumptionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

const EQ_TOL: f64 = 1e-9;

fn check(name: &str, violation: Option<f64>, detail: impl Into<String>) -> AssumptionCheck {
    AssumptionCheck {
        name: name.to_string(),
        passed: violation.is_none(),
        first_violation: violation,
        detail: detail.into(),
    }
}

fn first_bad(points: &[f64], bad: impl Fn(f64) -> bool) -> Option<f64> {
    points.iter().copied().find(|&x| bad(x))
}

/// Grid check of the sign structure of `f`, `D`, `g` on `grid` uniform
/// points plus the special points `0, alpha, gamma, 1`.
pub fn validate_problem(cs: &CoefficientSet, grid: usize) -> ValidationReport {
    let (a, gm) = (cs.alpha, cs.gamma);
    let mut checks = Vec::new();
    let range_bad = !(a > 0.0 && a < 1.0 && gm > 0.0 && gm < 1.0);
    checks.push(check(
        "alpha/gamma range",
        if range_bad { Some(if a > 0.0 && a < 1.0 { gm } else { a }) } else { None },
        format!("alpha = {}, gamma = {} must lie in (0, 1)", a, gm),
    ));
    let pts: Vec<f64> = (1..grid).map(|i| i as f64 / grid as f64).collect();
    let special = [0.0, a, gm, 1.0];
    let finite_bad = |fun: &Func| {
        first_bad(&pts, |x| !fun.eval(x).is_finite())
            .or_else(|| first_bad(&special, |x| !fun.eval(x).is_finite()))
    };
    for (name, fun) in [("f finite", &cs.f), ("D finite", &cs.d), ("g finite", &cs.g), ("h finite", &cs.h)]
    {
        checks.push(check(name, finite_bad(fun), "evaluation defined on the grid and special points"));
    }
    checks.push(check(
        "(f) f(0) = 0",
        if cs.f.eval(0.0).abs() > EQ_TOL { Some(0.0) } else { None },
        format!("f(0) = {}", cs.f.eval(0.0)),
    ));
    let d = &cs.d;
    let d_viol = first_bad(&pts, |x| {
        let v = d.eval(x);
        (x < a - 1e-12 && !(v > 0.0)) || (x > a + 1e-12 && !(v < 0.0))
    })
    .or_else(|| if d.eval(a).abs() > EQ_TOL { Some(a) } else { None });
    checks.push(check("(D) D > 0 on (0,alpha), D < 0 on (alpha,1)", d_viol, "sign of D on the grid"));
    let g = &cs.g;
    let g_viol = first_bad(&pts, |x| {
        let v = g.eval(x);
        (x < gm - 1e-12 && !(v < 0.0)) || (x > gm + 1e-12 && !(v > 0.0))
    })
    .or_else(|| first_bad(&[0.0, gm, 1.0], |x| !(g.eval(x).abs() <= EQ_TOL)));
    checks.push(check(
        "(g) g < 0 on (0,gamma), g > 0 on (gamma,1), g(0) = g(gamma) = g(1) = 0",
        g_viol,
        "sign and zeros of g",
    ));
    ValidationReport { checks }
}
