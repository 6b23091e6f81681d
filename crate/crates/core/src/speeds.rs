//! Admissible-speed set by cases on the ordering of `alpha` and `gamma`,
//! and the glued solution `z` on `[0, 1]` for an admissible speed.

use serde::Serialize;

use crate::coeffs::{CoefficientSet, Func, Function};
use crate::conditions::{check_g_growth, GrowthFlags};
use crate::error::{Error, Result};
use crate::singular::{compute_beta, solve_terminal, solve_zeta, zeta_left, ZCurve, ZSample};
use crate::thresholds::{compute_named_thresholds, ThresholdId, ThresholdSet};
use crate::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    AlphaGtGamma,
    AlphaEqGamma,
    AlphaLtGamma,
}

impl Case {
    pub fn of(cs: &CoefficientSet) -> Case {
        if (cs.alpha - cs.gamma).abs() <= 1e-9 {
            Case::AlphaEqGamma
        } else if cs.alpha > cs.gamma {
            Case::AlphaGtGamma
        } else {
            Case::AlphaLtGamma
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Inclusion {
    Yes,
    No,
    Unknown,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpeedSet {
    Empty,
    Singleton { c: f64 },
    Interval { lo: f64, hi: f64, lo_included: Inclusion, hi_included: Inclusion },
}

impl SpeedSet {
    pub fn is_empty(&self) -> bool {
        matches!(self, SpeedSet::Empty)
    }

    /// Closure hull `[lo, hi]`, if nonempty.
    pub fn hull(&self) -> Option<(f64, f64)> {
        match *self {
            SpeedSet::Empty => None,
            SpeedSet::Singleton { c } => Some((c, c)),
            SpeedSet::Interval { lo, hi, .. } => Some((lo, hi)),
        }
    }

    /// The member used for a requested speed: the singleton itself within
    /// `slack`, or `c` clamped into the interval when within `slack` of it.
    pub fn member(&self, c: f64, slack: f64) -> Option<f64> {
        match *self {
            SpeedSet::Empty => None,
            SpeedSet::Singleton { c: s } => ((c - s).abs() <= slack).then_some(s),
            SpeedSet::Interval { lo, hi, .. } => {
                (c >= lo - slack && c <= hi + slack).then_some(c.clamp(lo, hi))
            }
        }
    }
}

/// Flat on the wire, so `J.lo` and `J.hi` exist for every nonempty set.
impl Serialize for SpeedSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use crate::report::Num as F;
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(None)?;
        match *self {
            SpeedSet::Empty => m.serialize_entry("kind", "empty")?,
            SpeedSet::Singleton { c } => {
                m.serialize_entry("kind", "singleton")?;
                m.serialize_entry("lo", &F(c))?;
                m.serialize_entry("hi", &F(c))?;
                m.serialize_entry("lo_included", &Inclusion::Yes)?;
                m.serialize_entry("hi_included", &Inclusion::Yes)?;
                m.serialize_entry("c", &F(c))?;
            }
            SpeedSet::Interval { lo, hi, lo_included, hi_included } => {
                m.serialize_entry("kind", "interval")?;
                m.serialize_entry("lo", &F(lo))?;
                m.serialize_entry("hi", &F(hi))?;
                m.serialize_entry("lo_included", &lo_included)?;
                m.serialize_entry("hi_included", &hi_included)?;
            }
        }
        m.end()
    }
}

/// `beta(c)` bookkeeping of the family of solutions when `alpha < gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FamilyInfo {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub c: f64,
    /// Largest admissible `z(gamma)` from the `(alpha, gamma)` piece.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub beta1: f64,
    /// Largest admissible `z(gamma)` from the `(gamma, 1)` piece.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub beta2: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub beta: f64,
    /// `beta / D(gamma)`, the most negative slope at the `gamma` crossing.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lambda_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Probe {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub at: f64,
    pub solvable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedReport {
    pub case: Case,
    pub thresholds: ThresholdSet,
    #[serde(rename = "J")]
    pub j: SpeedSet,
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub c1star: Option<f64>,
    pub family: Option<FamilyInfo>,
    pub growth: GrowthFlags,
    /// Numerical probes of endpoints whose membership is not settled.
    pub probes: Vec<Probe>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub tol: f64,
}

impl SpeedReport {
    pub fn member_slack(&self) -> f64 {
        (1e3 * self.tol).max(1e-9)
    }
}

fn left_value(cs: &CoefficientSet, id: ThresholdId, c: f64, cfg: &SolverConfig) -> Result<f64> {
    let p = id.canonical(cs, c).expect("piece exists");
    let (w, _) = zeta_left(&p, cfg)?;
    let s = if id.orientation().flip_z { -1.0 } else { 1.0 };
    Ok(s * w)
}

/// Matching defect at `gamma` when `alpha > gamma`: the left piece vanishing
/// at 0 minus the middle piece vanishing at `alpha`, both evaluated at `gamma`.
pub fn gamma_mismatch(cs: &CoefficientSet, c: f64, cfg: &SolverConfig) -> Result<f64> {
    let left = {
        let p = crate::singular::Orientation { flip_x: true, flip_z: false }
            .canonical(&cs.q_func(), &cs.h, c, 0.0, cs.gamma);
        zeta_left(&p, cfg)?.0
    };
    let mid = left_value(cs, ThresholdId::C12, c, cfg)?;
    Ok(left - mid)
}

/// Unique speed gluing the two pieces on `(0, gamma)` and `(gamma, alpha)`,
/// found by bisection of the decreasing mismatch on `(c11, c12)`.
pub fn solve_c1star(cs: &CoefficientSet, cfg: &SolverConfig) -> Result<f64> {
    let th = compute_named_thresholds(cs, cfg)?;
    solve_c1star_with(cs, &th, cfg)
}

pub fn solve_c1star_with(cs: &CoefficientSet, th: &ThresholdSet, cfg: &SolverConfig) -> Result<f64> {
    if Case::of(cs) != Case::AlphaGtGamma {
        return Err(Error::Precondition("c1* needs alpha > gamma".into()));
    }
    let c11 = th.c11.value;
    let c12 = th.c12.map(|t| t.value).unwrap_or(f64::INFINITY);
    if !(c11 < c12) || !c11.is_finite() {
        return Err(Error::Precondition(format!("no gluing speed: c11 = {} >= c12 = {}", c11, c12)));
    }
    let mut lo = c11;
    let mut hi = if c12.is_finite() { c12 } else { c11 + 1.0 };
    let mut k = 0;
    while c12.is_infinite() && gamma_mismatch(cs, hi, cfg)? > 0.0 {
        lo = hi;
        hi += 2f64.powi(k);
        k += 1;
        if k > 20 {
            return Err(Error::Bracket { what: "c1*".into() });
        }
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if gamma_mismatch(cs, mid, cfg)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // the mismatch is smooth in c: a few false-position steps inside the
    // final bracket remove the bisection error from the glued solution
    let (mut mlo, mut mhi) = (gamma_mismatch(cs, lo, cfg)?, gamma_mismatch(cs, hi, cfg)?);
    let mut best = 0.5 * (lo + hi);
    for _ in 0..4 {
        if !(mlo > 0.0 && mhi < 0.0) {
            break;
        }
        let c = lo + (hi - lo) * mlo / (mlo - mhi);
        best = c;
        let m = gamma_mismatch(cs, c, cfg)?;
        if m == 0.0 {
            break;
        }
        if m > 0.0 {
            lo = c;
            mlo = m;
            mhi *= 0.5;
        } else {
            hi = c;
            mhi = m;
            mlo *= 0.5;
        }
    }
    Ok(best)
}

/// Admissible-speed set with thresholds, growth flags and family data.
pub fn admissible_speeds(cs: &CoefficientSet, cfg: &SolverConfig) -> Result<SpeedReport> {
    let th = compute_named_thresholds(cs, cfg)?;
    let growth = check_g_growth(cs);
    let case = Case::of(cs);
    let tol2 = 2.0 * cfg.tol;
    let mut c1star = None;
    let yes_or_unknown = if growth.integrability { Inclusion::Yes } else { Inclusion::Unknown };
    let j = match case {
        Case::AlphaGtGamma => {
            let c12 = th.c12.map(|t| t.value).unwrap_or(f64::INFINITY);
            if th.c11.value < c12 {
                let c1 = solve_c1star_with(cs, &th, cfg)?;
                c1star = Some(c1);
                if c1 >= th.c32.value - tol2 {
                    SpeedSet::Singleton { c: c1 }
                } else {
                    SpeedSet::Empty
                }
            } else {
                SpeedSet::Empty
            }
        }
        Case::AlphaEqGamma => {
            let (lo, hi) = (th.c32.value, th.c11.value);
            interval_or_point(lo, hi, tol2, yes_or_unknown, yes_or_unknown)
        }
        Case::AlphaLtGamma => {
            let c31 = th.c31.map(|t| t.value).unwrap_or(f64::INFINITY);
            let hi = th.c11.value.min(c31);
            let hi_inc = if growth.integrability || th.c11.value < c31 {
                Inclusion::Yes
            } else {
                Inclusion::Unknown
            };
            interval_or_point(th.c32.value, hi, tol2, yes_or_unknown, hi_inc)
        }
    };
    let mut report = SpeedReport {
        case,
        thresholds: th,
        j,
        c1star,
        family: None,
        growth,
        probes: Vec::new(),
        tol: cfg.tol,
    };
    if let SpeedSet::Interval { lo, hi, lo_included, hi_included } = report.j {
        for (at, inc) in [(lo, lo_included), (hi, hi_included)] {
            if inc == Inclusion::Unknown {
                let solvable = solve_z_for_speed(cs, &report, at, Selector::Canonical, cfg).is_ok();
                report.probes.push(Probe { at, solvable });
            }
        }
        if case == Case::AlphaLtGamma {
            report.family = family_at(cs, 0.5 * (lo + hi), cfg).ok();
        }
    }
    Ok(report)
}

fn interval_or_point(lo: f64, hi: f64, tol2: f64, lo_inc: Inclusion, hi_inc: Inclusion) -> SpeedSet {
    if !lo.is_finite() || !hi.is_finite() {
        return SpeedSet::Empty;
    }
    if (hi - lo).abs() <= tol2 {
        SpeedSet::Singleton { c: 0.5 * (lo + hi) }
    } else if lo < hi {
        SpeedSet::Interval { lo, hi, lo_included: lo_inc, hi_included: hi_inc }
    } else {
        SpeedSet::Empty
    }
}

/// `beta1`, `beta2` and `lambda_c` at speed `c` when `alpha < gamma`.
pub fn family_at(cs: &CoefficientSet, c: f64, cfg: &SolverConfig) -> Result<FamilyInfo> {
    let mid = ThresholdId::C31.canonical(cs, c).ok_or_else(|| Error::Precondition("alpha < gamma required".into()))?;
    let right = ThresholdId::C32.canonical(cs, c).expect("right piece");
    let b1 = -compute_beta(&mid.q, &mid.h, mid.c, mid.sigma1, mid.sigma2, cfg)?;
    let b2 = -compute_beta(&right.q, &right.h, right.c, right.sigma1, right.sigma2, cfg)?;
    let beta = b1.min(b2);
    Ok(FamilyInfo { c, beta1: b1, beta2: b2, beta, lambda_c: beta / cs.d.eval(cs.gamma) })
}

/// Which member of the solution family to build when `alpha < gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Selector {
    /// `lambda = 0` when the integrability flag holds, otherwise the
    /// member with `z(gamma) = beta(c) / 2`.
    Canonical,
    /// `z(gamma) = lambda D(gamma)`.
    Lambda(f64),
}

/// Solution `z` on `[0, 1]`, glued from pieces between the zeros of `z`
/// and `Dg`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GluedZ {
    pub pieces: Vec<ZCurve>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub c: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z_gamma: f64,
    /// `z(gamma) / D(gamma)` when `D(gamma) != 0`.
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub lambda: Option<f64>,
}

impl GluedZ {
    pub fn lo(&self) -> f64 {
        self.pieces[0].lo
    }

    pub fn hi(&self) -> f64 {
        self.pieces[self.pieces.len() - 1].hi
    }

    fn piece_at(&self, x: f64) -> Option<&ZCurve> {
        self.pieces.iter().find(|p| x >= p.lo && x <= p.hi)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.piece_at(x).map_or(f64::NAN, |p| p.eval(x))
    }

    pub fn eval_dz(&self, x: f64) -> f64 {
        self.piece_at(x).map_or(f64::NAN, |p| p.eval_dz(x))
    }

    /// Points inside `(lo, hi)` where `z` vanishes: the piece boundaries
    /// with zero limits.
    pub fn interior_zeros(&self) -> Vec<f64> {
        self.pieces
            .windows(2)
            .filter(|w| w[0].vanish_hi && w[1].vanish_lo)
            .map(|w| w[0].hi)
            .collect()
    }

    /// Sample a closed-form `z` on the pieces delimited by `breaks`.
    pub fn from_fn(z: Func, breaks: &[f64], c: f64, samples_per_piece: usize) -> GluedZ {
        let mut pieces = Vec::new();
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let n = samples_per_piece.max(8);
            let mut pts = Vec::with_capacity(n);
            for i in 1..n {
                // cosine spacing crowds samples at both ends
                let t = 0.5 - 0.5 * (std::f64::consts::PI * i as f64 / n as f64).cos();
                let x = lo + (hi - lo) * t;
                let d = 1e-7 * (hi - lo) * t.min(1.0 - t).max(1e-3);
                let dz = (z.eval(x + d) - z.eval(x - d)) / (2.0 * d);
                pts.push(ZSample { phi: x, z: z.eval(x), dz });
            }
            let zl = z.eval(lo);
            let zh = z.eval(hi);
            pieces.push(ZCurve {
                lo,
                hi,
                samples: pts,
                z_lo: zl,
                z_hi: zh,
                slope_lo: f64::NAN,
                slope_hi: f64::NAN,
                vanish_lo: zl.abs() < 1e-14,
                vanish_hi: zh.abs() < 1e-14,
            });
        }
        GluedZ { pieces, c, z_gamma: f64::NAN, lambda: None }
    }
}

fn piece(cs: &CoefficientSet, id: ThresholdId, lo: f64, hi: f64, c: f64, terminal: f64, cfg: &SolverConfig) -> Result<ZCurve> {
    let o = id.orientation();
    let p = o.canonical(&cs.q_func(), &cs.h, c, lo, hi);
    let w = if terminal == 0.0 { solve_zeta(&p, cfg)? } else { solve_terminal(&p, terminal, cfg)? };
    Ok(o.to_real(&w))
}

fn require_vanish(ok: bool, what: &str, c: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Numerical(format!("{} does not vanish at speed {}", what, c)))
    }
}

/// Glued solution for an admissible speed. When `alpha < gamma` the
/// selector picks `z(gamma) = lambda D(gamma)`.
pub fn solve_z_for_speed(
    cs: &CoefficientSet,
    report: &SpeedReport,
    c: f64,
    selector: Selector,
    cfg: &SolverConfig,
) -> Result<GluedZ> {
    let c = report.j.member(c, report.member_slack()).ok_or(Error::NotAdmissible { c })?;
    build_glued(cs, report.case, report.growth.integrability, c, selector, cfg)
}

/// `z` for instances outside the standing assumptions, where no
/// admissible set is available: the case is read off `alpha` and `gamma`.
pub fn direct_z(cs: &CoefficientSet, c: f64, selector: Selector, cfg: &SolverConfig) -> Result<GluedZ> {
    build_glued(cs, Case::of(cs), check_g_growth(cs).integrability, c, selector, cfg)
}

/// Glued solution without the membership check, for speeds the caller
/// already trusts.
pub fn build_glued(
    cs: &CoefficientSet,
    case: Case,
    integrability: bool,
    c: f64,
    selector: Selector,
    cfg: &SolverConfig,
) -> Result<GluedZ> {
    let (a, g) = (cs.alpha, cs.gamma);
    match case {
        Case::AlphaGtGamma => {
            let z1 = piece(cs, ThresholdId::C11, 0.0, g, c, 0.0, cfg)?;
            let z2 = piece(cs, ThresholdId::C12, g, a, c, 0.0, cfg)?;
            let z3 = piece(cs, ThresholdId::C32, a, 1.0, c, 0.0, cfg)?;
            let defect = (z1.z_hi - z2.z_lo).abs();
            require_vanish(defect <= 1e-4 * (z1.z_hi.abs() + z2.z_lo.abs()) + 1e-9, "mismatch at gamma", c)?;
            require_vanish(z3.vanish_hi, "right piece at 1", c)?;
            // each piece keeps its own limit: moving one end value would
            // tilt the end model next to gamma
            let zg = 0.5 * (z1.z_hi + z2.z_lo);
            let mut z1 = z1;
            let mut z2 = z2;
            z1.vanish_hi = false;
            z2.vanish_lo = false;
            Ok(GluedZ { pieces: vec![z1, z2, z3], c, z_gamma: zg, lambda: Some(zg / cs.d.eval(g)) })
        }
        Case::AlphaEqGamma => {
            let z1 = piece(cs, ThresholdId::C11, 0.0, a, c, 0.0, cfg)?;
            let z3 = piece(cs, ThresholdId::C32, a, 1.0, c, 0.0, cfg)?;
            require_vanish(z1.vanish_hi, "left piece at alpha", c)?;
            require_vanish(z3.vanish_hi, "right piece at 1", c)?;
            Ok(GluedZ { pieces: vec![z1, z3], c, z_gamma: 0.0, lambda: None })
        }
        Case::AlphaLtGamma => {
            let dg = cs.d.eval(g);
            let s = match selector {
                Selector::Lambda(l) => {
                    if l > 0.0 {
                        return Err(Error::Precondition(format!("lambda = {} must be <= 0", l)));
                    }
                    if l == 0.0 && !integrability {
                        return Err(Error::Precondition(
                            "lambda = 0 needs the integrability condition on g at gamma".into(),
                        ));
                    }
                    l * dg
                }
                Selector::Canonical => {
                    if integrability {
                        0.0
                    } else {
                        0.5 * family_at(cs, c, cfg)?.beta
                    }
                }
            };
            let mut pieces = Vec::new();
            if a > 0.0 {
                let z1 = piece(cs, ThresholdId::C11, 0.0, a, c, 0.0, cfg)?;
                require_vanish(z1.vanish_hi, "left piece at alpha", c)?;
                pieces.push(z1);
            }
            let z2 = piece(cs, ThresholdId::C31, a, g, c, -s, cfg)?;
            let z3 = piece(cs, ThresholdId::C32, g, 1.0, c, -s, cfg)?;
            if !z2.vanish_lo || !z3.vanish_hi {
                return Err(Error::Precondition(format!(
                    "z(gamma) = {} lies outside the solution family at speed {}",
                    s, c
                )));
            }
            pieces.push(z2);
            pieces.push(z3);
            Ok(GluedZ { pieces, c, z_gamma: s, lambda: Some(s / dg) })
        }
    }
}

impl Function for GluedZ {
    fn eval(&self, x: f64) -> f64 {
        GluedZ::eval(self, x)
    }
}
