//! Wavefront profiles from solutions of the reduced equation, through
//! `phi' = z(phi) / D(phi)`.

use serde::Serialize;

use crate::coeffs::{CoefficientSet, Function};
use crate::error::{Error, Result};
use crate::numerics::quad::{adaptive, gauss_legendre, improper_tail, Tail};
use crate::singular::{indicial_slopes, ZCurve, ZSample};
use crate::speeds::{Case, GluedZ, SpeedReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfileSample {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub xi: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub phi: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub dphi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Location {
    Zero,
    Alpha,
    Gamma,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlopeKind {
    ClassicalZero,
    ClassicalNegative {
        value: f64,
    },
    SharpInfinite,
    /// One-sided slopes `phi'(xi-)` and `phi'(xi+)`.
    Corner {
        #[serde(serialize_with = "crate::report::ser_f64")]
        left: f64,
        #[serde(serialize_with = "crate::report::ser_f64")]
        right: f64,
    },
    Unclassified,
}

const SHARP: f64 = 1e3;

impl SlopeKind {
    fn of_value(v: f64) -> SlopeKind {
        if v.is_nan() {
            SlopeKind::Unclassified
        } else if v.abs() > SHARP {
            SlopeKind::SharpInfinite
        } else if v.abs() < 1e-6 {
            SlopeKind::ClassicalZero
        } else {
            SlopeKind::ClassicalNegative { value: v }
        }
    }

    fn of_sides(left: f64, right: f64) -> SlopeKind {
        if left.abs() > SHARP && right.abs() > SHARP {
            return SlopeKind::SharpInfinite;
        }
        if (left - right).abs() <= 1e-3 * (1.0 + left.abs().max(right.abs())) {
            SlopeKind::of_value(0.5 * (left + right))
        } else {
            SlopeKind::Corner { left, right }
        }
    }

    /// The slope as a number, when one-sided values agree.
    pub fn value(&self) -> Option<f64> {
        match *self {
            SlopeKind::ClassicalZero => Some(0.0),
            SlopeKind::ClassicalNegative { value } => Some(value),
            SlopeKind::SharpInfinite => Some(f64::NEG_INFINITY),
            _ => None,
        }
    }
}

/// Where the profile meets a special level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Junction {
    pub location: Location,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub level: f64,
    /// Arrival at `level` from above.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub xi_minus: f64,
    /// Departure below `level`; later than `xi_minus` across a plateau.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub xi_plus: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub slope_minus: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub slope_plus: f64,
    /// `D(phi) phi'` vanishes at the level.
    pub zero_flux: bool,
    pub slope: SlopeKind,
}

impl Junction {
    pub fn finite(&self) -> bool {
        self.xi_minus.is_finite() && self.xi_plus.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Plateau {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub level: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub start: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub end: f64,
}

/// Sampled profile: `xi` ascending, `phi` non-increasing from near 1 to
/// near 0.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileCurve {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub c: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub alpha: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub gamma: f64,
    pub samples: Vec<ProfileSample>,
    pub junctions: Vec<Junction>,
    pub plateaus: Vec<Plateau>,
}

impl ProfileCurve {
    pub fn junction(&self, loc: Location) -> Option<&Junction> {
        self.junctions.iter().find(|j| j.location == loc)
    }

    fn junction_at_level(&self, level: f64) -> Option<usize> {
        self.junctions.iter().position(|j| (j.level - level).abs() < 1e-9 && j.location != Location::Zero && j.location != Location::One)
    }

    /// Linear interpolation of `phi` at `xi`, constant beyond the samples.
    pub fn eval(&self, xi: f64) -> f64 {
        let s = &self.samples;
        if xi <= s[0].xi {
            return s[0].phi;
        }
        if xi >= s[s.len() - 1].xi {
            return s[s.len() - 1].phi;
        }
        let i = s.partition_point(|p| p.xi <= xi);
        let (a, b) = (s[i - 1], s[i]);
        if b.xi == a.xi {
            return b.phi;
        }
        a.phi + (b.phi - a.phi) * (xi - a.xi) / (b.xi - a.xi)
    }

    pub fn xi_range(&self) -> (f64, f64) {
        (self.samples[0].xi, self.samples[self.samples.len() - 1].xi)
    }

    /// The same profile translated by `dx` in `xi`.
    pub fn shifted(&self, dx: f64) -> ProfileCurve {
        let mut out = self.clone();
        out.shift(dx);
        out
    }

    fn shift(&mut self, dx: f64) {
        for s in &mut self.samples {
            s.xi += dx;
        }
        for j in &mut self.junctions {
            j.xi_minus += dx;
            j.xi_plus += dx;
        }
        for p in &mut self.plateaus {
            p.start += dx;
            p.end += dx;
        }
    }
}

/// Normalization `phi(xi) = phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub phi: f64,
    pub xi: f64,
}

impl Anchor {
    /// `phi = (alpha + 1) / 2` at `xi = 0`.
    pub fn default_for(cs: &CoefficientSet) -> Anchor {
        Anchor { phi: 0.5 * (cs.alpha + 1.0), xi: 0.0 }
    }
}

const MAX_DXI: f64 = 0.005;
const MAX_DPHI: f64 = 2e-3;
const REL_DPHI: f64 = 4e-3;
/// Closest approach to an equilibrium reached only asymptotically.
const EQ_OFFSET: f64 = 1e-7;
const EXTENSION: f64 = 1.0;
/// Algebraic approach to an end can make `xi` huge well before the offset
/// above; samples stop at this distance from the branch middle.
const MAX_SPAN: f64 = 1e3;
const MAX_NODES: usize = 200_000;

fn trim_span(phis: &mut Vec<f64>, xi: &mut Vec<f64>) {
    let keep: Vec<bool> = xi.iter().map(|x| x.abs() <= MAX_SPAN).collect();
    let mut i = 0;
    phis.retain(|_| {
        i += 1;
        keep[i - 1]
    });
    xi.retain(|x| x.abs() <= MAX_SPAN);
}

/// One monotone branch between consecutive junction levels.
struct Segment {
    lo: f64,
    hi: f64,
    /// `(phi, xi)` ascending in `phi`, `xi` relative to the branch.
    nodes: Vec<(f64, f64)>,
    xi_lo: f64,
    xi_hi: f64,
}

fn graded_nodes(lo: f64, hi: f64, off_lo: f64, off_hi: f64) -> Vec<f64> {
    let w = hi - lo;
    let mut v = Vec::new();
    let n = 64;
    for i in 1..n {
        v.push(lo + w * i as f64 / n as f64);
    }
    for (end, off, dir) in [(lo, off_lo, 1.0), (hi, off_hi, -1.0)] {
        let mut d = off;
        while d < 0.5 * w {
            v.push(end + dir * d);
            d *= std::f64::consts::SQRT_2;
        }
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(1.0));
    v.retain(|&x| x > lo && x < hi);
    v
}

fn cumulative(rate: &dyn Fn(f64) -> f64, phis: &[f64]) -> Vec<f64> {
    let m = phis.len() / 2;
    let mut xi = vec![0.0; phis.len()];
    for j in m + 1..phis.len() {
        xi[j] = xi[j - 1] + gauss_legendre(rate, phis[j - 1], phis[j], 1);
    }
    for j in (0..m).rev() {
        xi[j] = xi[j + 1] - gauss_legendre(rate, phis[j], phis[j + 1], 1);
    }
    xi
}

fn build_segment(rate: &dyn Fn(f64) -> f64, lo: f64, hi: f64, eq_lo: bool, eq_hi: bool) -> Result<Segment> {
    let w = hi - lo;
    let off = |eq: bool| if eq { EQ_OFFSET } else { 1e-9 * w };
    let mut phis = graded_nodes(lo, hi, off(eq_lo), off(eq_hi));
    for &x in &phis {
        let r = rate(x);
        if !(r < 0.0) || !r.is_finite() {
            return Err(Error::Numerical(format!(
                "inconsistent z: D/z = {} is not negative at phi = {}",
                r, x
            )));
        }
    }
    let mut xi = cumulative(rate, &phis);
    trim_span(&mut phis, &mut xi);
    for _ in 0..8 {
        let mut next = Vec::with_capacity(phis.len());
        let mut refined = false;
        for j in 0..phis.len() {
            next.push(phis[j]);
            if j + 1 < phis.len() {
                let dphi = phis[j + 1] - phis[j];
                let dxi = (xi[j + 1] - xi[j]).abs();
                // near a finite-time end phi'' blows up; grade relative to the distance
                let dist = (phis[j] - lo).min(hi - phis[j + 1]).max(0.0);
                let rel = dphi / (REL_DPHI * dist).max(1e-300);
                let k = ((dxi / MAX_DXI).max(dphi / MAX_DPHI).max(rel.min(1e6))).ceil() as usize;
                let k = k.min(256);
                if k > 1 && next.len() < MAX_NODES {
                    refined = true;
                    for i in 1..k {
                        next.push(phis[j] + dphi * i as f64 / k as f64);
                    }
                }
            }
        }
        if !refined {
            break;
        }
        phis = next;
        xi = cumulative(rate, &phis);
    }
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergent(format!("reaching-time integral diverges inside ({}, {})", lo, hi)));
    }
    trim_span(&mut phis, &mut xi);
    let first = phis[0];
    let last = phis[phis.len() - 1];
    // xi(end) = xi(inner) - int_end^inner D/z
    let xi_lo = match improper_tail(rate, first, lo) {
        Tail::Finite(t) => xi[0] - t,
        Tail::Infinite => f64::INFINITY,
    };
    let xi_hi = match improper_tail(rate, last, hi) {
        Tail::Finite(t) => xi[xi.len() - 1] - t,
        Tail::Infinite => f64::NEG_INFINITY,
    };
    let nodes = phis.into_iter().zip(xi).collect();
    Ok(Segment { lo, hi, nodes, xi_lo, xi_hi })
}

fn one_sided_slope(z: &GluedZ, d: &dyn Function, level: f64, side: f64) -> f64 {
    let x = level + side * 1e-7;
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    z.eval(x) / d.eval(x)
}

/// Reconstruct `phi` from `z` by quadrature of `xi(phi) = int D/z` on each
/// branch, gluing the branches through finite junctions.
pub fn reconstruct_profile(cs: &CoefficientSet, z: &GluedZ, c: f64, anchor: Option<Anchor>) -> Result<ProfileCurve> {
    let (alpha, gamma) = (cs.alpha, cs.gamma);
    let d = cs.d.clone();
    let zc = z.clone();
    let rate = move |x: f64| d.eval(x) / zc.eval(x);
    let mut levels = vec![0.0, 1.0];
    if alpha > 0.0 && alpha < 1.0 {
        levels.push(alpha);
    }
    levels.extend(z.interior_zeros());
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    // branches from the top down
    let mut segs = Vec::new();
    for w in levels.windows(2).rev() {
        let (lo, hi) = (w[0], w[1]);
        segs.push(build_segment(&rate, lo, hi, lo == 0.0, hi == 1.0)?);
    }
    // glue: xi of the lower branch at its top equals xi of the upper branch at its bottom
    let mut offsets = vec![0.0; segs.len()];
    for k in 1..segs.len() {
        let above = segs[k - 1].xi_lo + offsets[k - 1];
        let below = segs[k].xi_hi;
        if !above.is_finite() || !below.is_finite() {
            return Err(Error::Divergent(format!(
                "junction at phi = {} is reached at infinite xi; the branches cannot be glued",
                segs[k].hi
            )));
        }
        offsets[k] = above - below;
    }
    let anchor = anchor.unwrap_or_else(|| Anchor::default_for(cs));
    if !(anchor.phi > 0.0 && anchor.phi < 1.0) {
        return Err(Error::Precondition(format!("anchor phi = {} must lie in (0, 1)", anchor.phi)));
    }
    let xi_anchor = if let Some(k) = segs.iter().position(|s| (s.lo - anchor.phi).abs() < 1e-12) {
        // a junction level: anchor the junction itself
        let x = segs[k].xi_lo + offsets[k];
        if !x.is_finite() {
            return Err(Error::Precondition(format!("anchor level {} is reached at infinite xi", anchor.phi)));
        }
        x
    } else {
        let k = segs.iter().position(|s| anchor.phi > s.lo && anchor.phi < s.hi).unwrap();
        let s = &segs[k];
        let j = s.nodes.partition_point(|n| n.0 < anchor.phi).min(s.nodes.len() - 1);
        let (p0, x0) = s.nodes[j];
        x0 + adaptive(&rate, p0, anchor.phi, 1e-13, 1e-11).0 + offsets[k]
    };
    let shift = anchor.xi - xi_anchor;

    let mut samples = Vec::new();
    let mut junction_xi: Vec<(f64, f64)> = Vec::new();
    for (k, s) in segs.iter().enumerate() {
        let off = offsets[k] + shift;
        let top = s.xi_hi + off;
        if k == 0 && top.is_finite() {
            let sl = one_sided_slope(z, cs.d.as_ref(), 1.0, -1.0);
            if cs.g.eval(1.0).abs() <= 1e-12 {
                for i in (1..=(EXTENSION / 0.05) as usize).rev() {
                    samples.push(ProfileSample { xi: top - 0.05 * i as f64, phi: 1.0, dphi: 0.0 });
                }
            }
            samples.push(ProfileSample { xi: top, phi: 1.0, dphi: if sl.is_finite() { sl } else { 0.0 } });
        }
        junction_xi.push((s.hi, top));
        for &(p, x) in s.nodes.iter().rev() {
            samples.push(ProfileSample { xi: x + off, phi: p, dphi: rate(p).recip() });
        }
        let bottom = s.xi_lo + off;
        if k == segs.len() - 1 {
            junction_xi.push((0.0, bottom));
            if bottom.is_finite() {
                let sl = one_sided_slope(z, cs.d.as_ref(), 0.0, 1.0);
                samples.push(ProfileSample { xi: bottom, phi: 0.0, dphi: if sl.is_finite() { sl } else { 0.0 } });
                // constant continuation only where it solves the equation
                if cs.g.eval(0.0).abs() <= 1e-12 {
                    for i in 1..=(EXTENSION / 0.05) as usize {
                        samples.push(ProfileSample { xi: bottom + 0.05 * i as f64, phi: 0.0, dphi: 0.0 });
                    }
                }
            }
        } else {
            let l = s.lo;
            let (m, p) = (one_sided_slope(z, cs.d.as_ref(), l, 1.0), one_sided_slope(z, cs.d.as_ref(), l, -1.0));
            if m.is_finite() && p.is_finite() && (m - p).abs() <= 1e-6 * (1.0 + m.abs()) && bottom.is_finite() {
                samples.push(ProfileSample { xi: bottom, phi: l, dphi: 0.5 * (m + p) });
            }
        }
    }

    samples.dedup_by(|b, a| b.xi <= a.xi);

    let xi_at = |level: f64| -> f64 {
        if let Some(&(_, x)) = junction_xi.iter().find(|(l, _)| (l - level).abs() < 1e-12) {
            return x;
        }
        // inside a branch
        let k = segs.iter().position(|s| level > s.lo && level < s.hi).unwrap();
        let s = &segs[k];
        let j = s.nodes.partition_point(|n| n.0 < level).min(s.nodes.len() - 1);
        let (p0, x0) = s.nodes[j];
        x0 + adaptive(&rate, p0, level, 1e-13, 1e-11).0 + offsets[k] + shift
    };
    let mut junctions = Vec::new();
    let mut push = |loc: Location, level: f64| {
        let x = xi_at(level);
        let sm = if level >= 1.0 { 0.0 } else { one_sided_slope(z, cs.d.as_ref(), level, 1.0) };
        let sp = if level <= 0.0 { 0.0 } else { one_sided_slope(z, cs.d.as_ref(), level, -1.0) };
        let zero_flux = level <= 0.0 || level >= 1.0 || z.eval(level).abs() <= 1e-12 || cs.d.eval(level).abs() <= 1e-12;
        junctions.push(Junction {
            location: loc,
            level,
            xi_minus: x,
            xi_plus: x,
            slope_minus: sm,
            slope_plus: sp,
            zero_flux,
            slope: SlopeKind::of_sides(sm, sp),
        });
    };
    push(Location::One, 1.0);
    if alpha > 0.0 && alpha < 1.0 {
        push(Location::Alpha, alpha);
    }
    if (gamma - alpha).abs() > 1e-12 {
        push(Location::Gamma, gamma);
    }
    push(Location::Zero, 0.0);
    junctions.sort_by(|a, b| b.level.partial_cmp(&a.level).unwrap());

    Ok(ProfileCurve { c, alpha, gamma, samples, junctions, plateaus: Vec::new() })
}

/// Stretch at level `gamma`: the part above moves left by `delta1`, the part
/// below right by `delta2`, and `phi = gamma` fills the gap.
pub fn insert_plateau(p: &ProfileCurve, delta1: f64, delta2: f64) -> Result<ProfileCurve> {
    if !(delta1 >= 0.0 && delta2 >= 0.0) {
        return Err(Error::Precondition(format!("stretch lengths must be non-negative, got {} and {}", delta1, delta2)));
    }
    let gamma = p.gamma;
    let Some(ji) = p.junction_at_level(gamma) else {
        return Err(Error::PlateauRejected("the profile has no junction at gamma".into()));
    };
    let j = p.junctions[ji].clone();
    if !j.zero_flux {
        return Err(Error::PlateauRejected(format!(
            "flux does not vanish at gamma: phi'(xi_gamma) = {} < 0",
            j.slope_minus
        )));
    }
    if !j.finite() {
        return Err(Error::PlateauRejected("gamma is reached at infinite xi".into()));
    }
    if delta1 == 0.0 && delta2 == 0.0 {
        return Ok(p.clone());
    }
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for s in &p.samples {
        if s.phi > gamma || (s.phi == gamma && s.xi <= j.xi_minus) {
            upper.push(ProfileSample { xi: s.xi - delta1, ..*s });
        } else if s.phi < gamma || (s.phi == gamma && s.xi >= j.xi_plus) {
            lower.push(ProfileSample { xi: s.xi + delta2, ..*s });
        }
    }
    let start = j.xi_minus - delta1;
    let end = j.xi_plus + delta2;
    let n = ((end - start) / MAX_DXI).ceil().max(1.0) as usize;
    let mut samples = upper;
    samples.retain(|s| s.xi < start);
    for i in 0..=n {
        samples.push(ProfileSample { xi: start + (end - start) * i as f64 / n as f64, phi: gamma, dphi: 0.0 });
    }
    samples.extend(lower.into_iter().filter(|s| s.xi > end));
    let mut junctions = p.junctions.clone();
    for jj in &mut junctions {
        if jj.level > gamma + 1e-9 {
            jj.xi_minus -= delta1;
            jj.xi_plus -= delta1;
        } else if jj.level < gamma - 1e-9 {
            jj.xi_minus += delta2;
            jj.xi_plus += delta2;
        }
    }
    junctions[ji].xi_minus = start;
    junctions[ji].xi_plus = end;
    let mut plateaus: Vec<Plateau> = p.plateaus.iter().filter(|q| (q.level - gamma).abs() > 1e-12).copied().collect();
    plateaus.push(Plateau { level: gamma, start, end });
    Ok(ProfileCurve { samples, junctions, plateaus, ..p.clone() })
}

/// Nonuniform centered first derivative at the middle of three points.
fn centered(x: [f64; 3], f: [f64; 3]) -> f64 {
    let h1 = x[1] - x[0];
    let h2 = x[2] - x[1];
    -h2 / (h1 * (h1 + h2)) * f[0] + (h2 - h1) / (h1 * h2) * f[1] + h1 / (h2 * (h1 + h2)) * f[2]
}

/// Fornberg weights of the first derivative at `x0` on nodes `xs`.
fn first_derivative_weights<const N: usize>(x0: f64, xs: &[f64; N]) -> [f64; N] {
    let mut c = [[0.0; 2]; N];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..N {
        let mn = i.min(1);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    let mut w = [0.0; N];
    for (k, row) in c.iter().enumerate() {
        w[k] = row[1];
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    /// Max of `|(D phi')' + (c - h) phi' + g|` where `|D| > 1e-3`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub max: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub mean: f64,
    pub count: usize,
    /// Where the max is attained.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub at: f64,
    /// Weak-form integrals against bumps around `xi_alpha`.
    pub weak: Vec<f64>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub weak_max: f64,
}

fn bump(t: f64) -> (f64, f64) {
    if t.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let u = 1.0 - t * t;
    let v = (-1.0 / u).exp();
    (v, v * (-2.0 * t / (u * u)))
}

/// Strong residual by centered differences of the flux (five points where
/// the samples allow, three otherwise) and weak-form
/// integrals against five smooth bumps spanning `xi_alpha`.
pub fn residual(p: &ProfileCurve, cs: &CoefficientSet, c: f64) -> ResidualStats {
    let s = &p.samples;
    let flux: Vec<f64> = s.iter().map(|q| cs.d.eval(q.phi) * q.dphi).collect();
    let (mut max, mut sum, mut count, mut at) = (0.0f64, 0.0, 0usize, f64::NAN);
    for i in 1..s.len().saturating_sub(1) {
        let (a, b, e) = (s[i - 1], s[i], s[i + 1]);
        if !(b.xi > a.xi && e.xi > b.xi) || cs.d.eval(b.phi).abs() <= 1e-3 {
            continue;
        }
        // five points where the stencil stays on one strictly monotone run
        let wide = i >= 2
            && i + 2 < s.len()
            && s[i - 2..=i + 2].windows(2).all(|w| w[1].xi > w[0].xi && w[1].phi < w[0].phi);
        let dv = if wide {
            let xs = [s[i - 2].xi, a.xi, b.xi, e.xi, s[i + 2].xi];
            let w = first_derivative_weights(b.xi, &xs);
            (0..5).map(|k| w[k] * flux[i - 2 + k]).sum()
        } else {
            centered([a.xi, b.xi, e.xi], [flux[i - 1], flux[i], flux[i + 1]])
        };
        let r = (dv + (c - cs.h.eval(b.phi)) * b.dphi + cs.g.eval(b.phi)).abs();
        if r.is_finite() {
            if r > max {
                max = r;
                at = b.xi;
            }
            sum += r;
            count += 1;
        }
    }
    // bumps stay inside the non-constant part: past a finite end the
    // profile may be a branch only
    let moving: Vec<f64> = s.iter().filter(|q| q.phi > 0.0 && q.phi < 1.0).map(|q| q.xi).collect();
    let (lo, hi) = (moving[0], moving[moving.len() - 1]);
    let center = [Location::Alpha, Location::Gamma]
        .iter()
        .filter_map(|&l| p.junction(l))
        .find(|j| j.finite() && j.level > 0.0 && j.level < 1.0)
        .map_or(0.5 * (lo.max(-10.0) + hi.min(10.0)), |j| 0.5 * (j.xi_minus + j.xi_plus))
        .clamp(lo, hi);
    let width = 1.0f64.min((center - lo) / 1.5).min((hi - center) / 1.5);
    let mut weak = Vec::new();
    for k in 0..5 {
        let m = center + 0.25 * (k as f64 - 2.0) * width;
        if !(width > 0.0) {
            weak.push(0.0);
            continue;
        }
        let integrand = |q: &ProfileSample, v: f64| {
            let (psi, dpsi) = bump((q.xi - m) / width);
            (v - cs.f.eval(q.phi) + c * q.phi) * dpsi / width - cs.g.eval(q.phi) * psi
        };
        let vals: Vec<(f64, f64)> = s
            .iter()
            .zip(&flux)
            .filter(|(q, _)| (q.xi - m).abs() < width)
            .map(|(q, &v)| (q.xi, integrand(q, v)))
            .collect();
        weak.push(simpson(&vals));
    }
    let weak_max = weak.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    ResidualStats { max, mean: if count > 0 { sum / count as f64 } else { 0.0 }, count, at, weak, weak_max }
}

/// Composite Simpson on nonuniform abscissae, trapezoid on a leftover cell.
fn simpson(v: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = {
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for &p in v {
            if out.last().map_or(true, |l| p.0 > l.0) {
                out.push(p);
            }
        }
        out
    };
    let mut total = 0.0;
    let mut i = 0;
    while i + 2 < pts.len() {
        let (x0, f0) = pts[i];
        let (x1, f1) = pts[i + 1];
        let (x2, f2) = pts[i + 2];
        let (h0, h1) = (x1 - x0, x2 - x1);
        total += (h0 + h1) / 6.0
            * ((2.0 - h1 / h0) * f0 + (h0 + h1) * (h0 + h1) / (h0 * h1) * f1 + (2.0 - h0 / h1) * f2);
        i += 2;
    }
    if i + 1 < pts.len() {
        let (x0, f0) = pts[i];
        let (x1, f1) = pts[i + 1];
        total += 0.5 * (x1 - x0) * (f0 + f1);
    }
    total
}

/// Flux `z = D(phi) phi'` as a function of `phi`, with `phi'` from
/// centered differences of the samples on each strictly monotone run.
pub fn extract_z(p: &ProfileCurve, cs: &CoefficientSet) -> Result<GluedZ> {
    let s = &p.samples;
    for w in s.windows(2) {
        if w[1].phi > w[0].phi + 1e-12 || w[1].xi < w[0].xi {
            return Err(Error::Numerical(format!("non-monotone samples near xi = {}", w[0].xi)));
        }
    }
    let mut levels: Vec<f64> = vec![0.0, 1.0];
    levels.extend(p.junctions.iter().filter(|j| j.zero_flux && j.level > 0.0 && j.level < 1.0).map(|j| j.level));
    levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
    levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let on_level = |x: f64| levels.iter().any(|&l| (x - l).abs() < 1e-13);

    // phi' on strictly decreasing runs
    let mut pairs: Vec<(f64, f64)> = Vec::new();
    for i in 0..s.len() {
        let b = s[i];
        if on_level(b.phi) {
            continue;
        }
        let prev = (i > 0 && s[i - 1].phi > b.phi).then(|| s[i - 1]);
        let next = (i + 1 < s.len() && s[i + 1].phi < b.phi).then(|| s[i + 1]);
        let dphi = match (prev, next) {
            (Some(a), Some(e)) => centered([a.xi, b.xi, e.xi], [a.phi, b.phi, e.phi]),
            (Some(a), None) => (b.phi - a.phi) / (b.xi - a.xi),
            (None, Some(e)) => (e.phi - b.phi) / (e.xi - b.xi),
            (None, None) => continue,
        };
        pairs.push((b.phi, cs.d.eval(b.phi) * dphi));
    }
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut pieces = Vec::new();
    for w in levels.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let pts: Vec<(f64, f64)> = pairs.iter().copied().filter(|&(x, _)| x > lo && x < hi).collect();
        if pts.len() < 3 {
            return Err(Error::Numerical(format!("too few samples on ({}, {})", lo, hi)));
        }
        let n = pts.len();
        let mut samples = Vec::with_capacity(n);
        for i in 0..n {
            let dz = if i == 0 {
                (pts[1].1 - pts[0].1) / (pts[1].0 - pts[0].0)
            } else if i == n - 1 {
                (pts[n - 1].1 - pts[n - 2].1) / (pts[n - 1].0 - pts[n - 2].0)
            } else {
                centered([pts[i - 1].0, pts[i].0, pts[i + 1].0], [pts[i - 1].1, pts[i].1, pts[i + 1].1])
            };
            samples.push(ZSample { phi: pts[i].0, z: pts[i].1, dz });
        }
        pieces.push(ZCurve {
            lo,
            hi,
            samples,
            z_lo: 0.0,
            z_hi: 0.0,
            slope_lo: f64::NAN,
            slope_hi: f64::NAN,
            vanish_lo: true,
            vanish_hi: true,
        });
    }
    let mut g = GluedZ { pieces, c: p.c, z_gamma: f64::NAN, lambda: None };
    let zg = g.eval(p.gamma);
    let dg = cs.d.eval(p.gamma);
    g.z_gamma = zg;
    g.lambda = (dg != 0.0).then(|| zg / dg);
    Ok(g)
}

/// Profile regularity at `alpha` for an admissible speed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessClass {
    pub location: Location,
    /// Which branch of the classification applied, e.g. `"c.i"`.
    pub subcase: String,
    /// `phi'` at `xi_alpha`; when `alpha = gamma`, at the lower end
    /// `xi_alpha^2` from the right.
    pub kind: SlopeKind,
    /// When `alpha = gamma`: `phi'` at `xi_alpha^1` from the left.
    pub upper: Option<SlopeKind>,
}

/// Roots `s_- <= s_+` of `m^2 - (h(alpha) - c) m + Ddot(alpha) g(alpha) = 0`.
fn alpha_roots(dg: f64, hc: f64) -> Result<(f64, f64)> {
    if dg <= 0.0 {
        return indicial_slopes(dg, hc, 0.0);
    }
    let disc = hc * hc - 4.0 * dg;
    if disc < 0.0 {
        return Err(Error::Numerical(format!("complex slopes at alpha (discriminant {})", disc)));
    }
    let big = 0.5 * (hc + hc.signum() * disc.sqrt());
    let small = dg / big;
    Ok((big.min(small), big.max(small)))
}

/// Regularity of the profile at `alpha` from the speed and thresholds.
pub fn classify_at_alpha(cs: &CoefficientSet, c: f64, report: &SpeedReport) -> Result<SharpnessClass> {
    let c = report.j.member(c, report.member_slack()).ok_or(Error::NotAdmissible { c })?;
    let eq = 10.0 * report.tol;
    let a = cs.alpha;
    let ga = cs.g.eval(a);
    let ha = cs.h.eval(a);
    let dd = cs.d_dot.eval(a);
    let flat = dd.abs() <= 1e-9;
    let bracket = |v: f64| if flat { SlopeKind::SharpInfinite } else { SlopeKind::of_value(v) };
    let th = &report.thresholds;
    let class = |subcase: &str, kind: SlopeKind| SharpnessClass {
        location: Location::Alpha,
        subcase: subcase.into(),
        kind,
        upper: None,
    };
    match report.case {
        Case::AlphaGtGamma => {
            if !flat || c > ha + eq {
                let (sm, _) = indicial_slopes(dd * ga, ha, c)?;
                Ok(class("a", SlopeKind::of_value(ga / sm)))
            } else {
                Ok(class("a", SlopeKind::SharpInfinite))
            }
        }
        Case::AlphaEqGamma => {
            let c11 = th.c11.value;
            let (mut sub, kind) = if c < c11 - eq {
                ("b.i".to_string(), SlopeKind::ClassicalZero)
            } else if (c - c11).abs() <= eq && c11 < ha - eq {
                ("b.ii".to_string(), bracket((ha - c11) / dd))
            } else {
                (String::new(), SlopeKind::Unclassified)
            };
            let upper = if (c - ha).abs() <= eq && !flat {
                sub.push_str(if sub.is_empty() { "b.iii" } else { "+b.iii" });
                SlopeKind::ClassicalZero
            } else if c < ha - eq {
                sub.push_str(if sub.is_empty() { "b.iv" } else { "+b.iv" });
                bracket((ha - c) / dd)
            } else {
                SlopeKind::Unclassified
            };
            Ok(SharpnessClass { location: Location::Alpha, subcase: sub, kind, upper: Some(upper) })
        }
        Case::AlphaLtGamma => {
            let c11 = th.c11.value;
            let c31 = th.c31.map_or(f64::INFINITY, |t| t.value);
            let (sm, sp) = alpha_roots(dd * ga, ha - c)?;
            let minus = if flat { f64::NEG_INFINITY } else { ga / sm };
            let plus = ga / sp;
            let at11 = (c - c11).abs() <= eq;
            let at31 = (c - c31).abs() <= eq;
            if at11 && at31 {
                Ok(class("c.ii", bracket(ga / sm)))
            } else if at11 {
                Ok(class("c.iii", SlopeKind::Corner { left: minus, right: plus }))
            } else if at31 {
                Ok(class("c.iv", SlopeKind::Corner { left: plus, right: minus }))
            } else {
                Ok(class("c.i", SlopeKind::of_value(plus)))
            }
        }
    }
}
