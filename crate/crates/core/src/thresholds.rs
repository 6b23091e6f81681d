//! The four named thresholds, each the critical speed of one piece of the
//! full problem mapped onto the canonical orientation.

use serde::Serialize;

use crate::coeffs::CoefficientSet;
use crate::error::Result;
use crate::singular::{compute_cstar, cstar_bounds, CStarBounds, Orientation, SingularProblem};
use crate::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdId {
    /// Left piece `(0, min{alpha, gamma})`, vanishing at 0.
    C11,
    /// `(gamma, alpha)` when `alpha > gamma`, vanishing at `alpha`.
    C12,
    /// `(alpha, gamma)` when `alpha < gamma`, vanishing at `gamma`.
    C31,
    /// Right piece `(max{alpha, gamma}, 1)`, vanishing at the left end.
    C32,
}

impl ThresholdId {
    pub fn name(self) -> &'static str {
        match self {
            ThresholdId::C11 => "c11",
            ThresholdId::C12 => "c12",
            ThresholdId::C31 => "c31",
            ThresholdId::C32 => "c32",
        }
    }

    pub fn orientation(self) -> Orientation {
        match self {
            ThresholdId::C11 => Orientation { flip_x: true, flip_z: false },
            ThresholdId::C12 => Orientation { flip_x: false, flip_z: false },
            ThresholdId::C31 => Orientation { flip_x: false, flip_z: true },
            ThresholdId::C32 => Orientation { flip_x: true, flip_z: true },
        }
    }

    /// Real interval of the piece, or `None` when it does not exist for
    /// this ordering of `alpha` and `gamma`.
    pub fn interval(self, cs: &CoefficientSet) -> Option<(f64, f64)> {
        let (a, g) = (cs.alpha, cs.gamma);
        match self {
            ThresholdId::C11 => Some((0.0, a.min(g))),
            ThresholdId::C12 => (a > g).then_some((g, a)),
            ThresholdId::C31 => (a < g).then_some((a, g)),
            ThresholdId::C32 => Some((a.max(g), 1.0)),
        }
    }

    /// Canonical problem of this piece at real speed `c`.
    pub fn canonical(self, cs: &CoefficientSet, c: f64) -> Option<SingularProblem> {
        let (lo, hi) = self.interval(cs)?;
        Some(self.orientation().canonical(&cs.q_func(), &cs.h, c, lo, hi))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lower: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub upper: f64,
    /// Integral-mean upper bound when `q` is differentiable at the left end.
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub sharp_upper: Option<f64>,
}

impl Threshold {
    pub fn best_upper(&self) -> f64 {
        self.sharp_upper.map_or(self.upper, |s| s.min(self.upper))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdSet {
    pub c11: Threshold,
    pub c12: Option<Threshold>,
    pub c31: Option<Threshold>,
    pub c32: Threshold,
}

impl ThresholdSet {
    pub fn get(&self, id: ThresholdId) -> Option<Threshold> {
        match id {
            ThresholdId::C11 => Some(self.c11),
            ThresholdId::C12 => self.c12,
            ThresholdId::C31 => self.c31,
            ThresholdId::C32 => Some(self.c32),
        }
    }
}

/// Real-speed bounds from canonical ones: a negative speed factor swaps and
/// negates them.
fn to_real(k: f64, value: f64, b: &CStarBounds) -> Threshold {
    if k > 0.0 {
        Threshold { value, lower: b.lower, upper: b.upper, sharp_upper: b.sharp_upper }
    } else {
        // -c* with c* in [L, U] lies in [-U, -L]; the sharper canonical
        // upper bound becomes a sharper real lower bound.
        let lower = -b.best_upper();
        Threshold { value: -value, lower, upper: -b.lower, sharp_upper: None }
    }
}

/// Analytic bounds of one threshold, mapped to real speeds.
pub fn threshold_bounds(cs: &CoefficientSet, which: ThresholdId, grid: usize) -> Result<Option<Threshold>> {
    let Some(p) = which.canonical(cs, 0.0) else { return Ok(None) };
    let b = cstar_bounds(&p.q, &p.h, p.sigma1, p.sigma2, grid)?;
    let k = which.orientation().speed_factor();
    let mut t = to_real(k, f64::NAN, &b);
    t.value = f64::NAN;
    Ok(Some(t))
}

fn compute_one(cs: &CoefficientSet, id: ThresholdId, cfg: &SolverConfig) -> Result<Option<Threshold>> {
    let Some(p) = id.canonical(cs, 0.0) else { return Ok(None) };
    let r = compute_cstar(&p.q, &p.h, p.sigma1, p.sigma2, cfg)?;
    let k = id.orientation().speed_factor();
    Ok(Some(to_real(k, r.value, &r.bounds)))
}

/// `c11`, `c12` (when `alpha > gamma`), `c31` (when `alpha < gamma`) and
/// `c32`, each with its analytic sandwich.
pub fn compute_named_thresholds(cs: &CoefficientSet, cfg: &SolverConfig) -> Result<ThresholdSet> {
    let ids = [ThresholdId::C11, ThresholdId::C12, ThresholdId::C31, ThresholdId::C32];
    let results: Vec<Result<Option<Threshold>>> = std::thread::scope(|s| {
        let handles: Vec<_> = ids.iter().map(|&id| s.spawn(move || compute_one(cs, id, cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("threshold worker panicked")).collect()
    });
    let mut it = results.into_iter();
    let c11 = it.next().unwrap()?.expect("c11 always defined");
    let c12 = it.next().unwrap()?;
    let c31 = it.next().unwrap()?;
    let c32 = it.next().unwrap()?.expect("c32 always defined");
    Ok(ThresholdSet { c11, c12, c31, c32 })
}
