//! The singular problem `z' = h - c - q/z`, `z < 0` on `(sigma1, sigma2)`,
//! with `q > 0` inside and `q = 0` at both ends.

use std::sync::Arc;

use serde::Serialize;

use crate::coeffs::{difference_quotient_sup, dini_estimate, Func, Function, Kind, Side};
use crate::error::{Error, Result};
use crate::numerics::ode::{integrate, integrate_riccati, OdeOptions, Stop};
use crate::numerics::quad::gauss_legendre;
use crate::SolverConfig;

/// Reflection `x -> 1 - x` of points, optionally with a sign flip of
/// function values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Transform {
    Identity,
    /// `F(1 - x)`.
    Bar,
    /// `-F(1 - x)`.
    Tilde,
}

impl Transform {
    pub fn point(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Bar | Transform::Tilde => 1.0 - x,
        }
    }

    pub fn interval(self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Transform::Identity => (lo, hi),
            Transform::Bar | Transform::Tilde => (1.0 - hi, 1.0 - lo),
        }
    }

    pub fn function(self, f: Func) -> Func {
        match self {
            Transform::Identity => f,
            Transform::Bar => Arc::new(move |x: f64| f.eval(1.0 - x)),
            Transform::Tilde => Arc::new(move |x: f64| -f.eval(1.0 - x)),
        }
    }
}

/// How a piece of the full problem maps onto the canonical one:
/// `w(psi) = s z(x(psi))` with `x(psi) = 1 - psi` when `flip_x` and
/// `s = -1` when `flip_z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Orientation {
    pub flip_x: bool,
    pub flip_z: bool,
}

impl Orientation {
    pub const IDENTITY: Orientation = Orientation { flip_x: false, flip_z: false };

    /// Factor `k` with canonical speed `k c` and canonical `h` equal to
    /// `k h(x(psi))`.
    pub fn speed_factor(self) -> f64 {
        let s = if self.flip_z { -1.0 } else { 1.0 };
        let e = if self.flip_x { -1.0 } else { 1.0 };
        s * e
    }

    fn x_transform(self) -> Transform {
        if self.flip_x {
            Transform::Bar
        } else {
            Transform::Identity
        }
    }

    /// Canonical problem for the real interval `(lo, hi)` at real speed `c`.
    pub fn canonical(self, q: &Func, h: &Func, c: f64, lo: f64, hi: f64) -> SingularProblem {
        let qc = if self.flip_x { Transform::Tilde.function(q.clone()) } else { q.clone() };
        let hb = self.x_transform().function(h.clone());
        let k = self.speed_factor();
        let hc: Func = if k > 0.0 { hb } else { Arc::new(move |x: f64| -hb.eval(x)) };
        let (s1, s2) = self.x_transform().interval(lo, hi);
        SingularProblem { q: qc, h: hc, c: k * c, sigma1: s1, sigma2: s2 }
    }

    /// Map a canonical solution back to the real variables.
    pub fn to_real(self, w: &ZCurve) -> ZCurve {
        let s = if self.flip_z { -1.0 } else { 1.0 };
        let k = self.speed_factor();
        let mut samples: Vec<ZSample> = w
            .samples
            .iter()
            .map(|p| ZSample { phi: self.x_transform().point(p.phi), z: s * p.z, dz: k * p.dz })
            .collect();
        if self.flip_x {
            samples.reverse();
            ZCurve {
                lo: 1.0 - w.hi,
                hi: 1.0 - w.lo,
                samples,
                z_lo: s * w.z_hi,
                z_hi: s * w.z_lo,
                slope_lo: k * w.slope_hi,
                slope_hi: k * w.slope_lo,
                vanish_lo: w.vanish_hi,
                vanish_hi: w.vanish_lo,
            }
        } else {
            ZCurve {
                lo: w.lo,
                hi: w.hi,
                samples,
                z_lo: s * w.z_lo,
                z_hi: s * w.z_hi,
                slope_lo: k * w.slope_lo,
                slope_hi: k * w.slope_hi,
                vanish_lo: w.vanish_lo,
                vanish_hi: w.vanish_hi,
            }
        }
    }
}

#[derive(Clone)]
pub struct SingularProblem {
    pub q: Func,
    pub h: Func,
    pub c: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl SingularProblem {
    pub fn new(q: Func, h: Func, c: f64, sigma1: f64, sigma2: f64) -> SingularProblem {
        SingularProblem { q, h, c, sigma1, sigma2 }
    }

    pub fn at_speed(&self, c: f64) -> SingularProblem {
        SingularProblem { c, ..self.clone() }
    }

    fn width(&self) -> f64 {
        self.sigma2 - self.sigma1
    }

    /// `max q` over the interval, square-rooted: the natural scale of `z`.
    pub fn z_scale(&self) -> f64 {
        let w = self.width();
        let m = (1..128)
            .map(|i| self.q.eval(self.sigma1 + w * i as f64 / 128.0))
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        m.sqrt().max(1e-300)
    }

    /// Threshold below which `z(sigma1)` counts as zero.
    pub fn zero_tol(&self, cfg: &SolverConfig) -> f64 {
        cfg.zero_factor * self.z_scale()
    }

    /// Invariant check: `q > 0` on an interior grid and `q = 0` at the ends.
    pub fn check(&self, grid: usize) -> Result<()> {
        if !(self.sigma2 > self.sigma1) {
            return Err(Error::EmptyInterval { lo: self.sigma1, hi: self.sigma2 });
        }
        for i in 1..grid {
            let x = self.sigma1 + self.width() * i as f64 / grid as f64;
            if !(self.q.eval(x) > 0.0) {
                return Err(Error::Precondition(format!("q is not positive at {}", x)));
            }
        }
        for x in [self.sigma1, self.sigma2] {
            if !(self.q.eval(x).abs() <= 1e-9) {
                return Err(Error::Precondition(format!("q does not vanish at {}", x)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZSample {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub phi: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub dz: f64,
}

/// Sampled solution of the first-order equation on `[lo, hi]`. Endpoint
/// slopes may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZCurve {
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lo: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub hi: f64,
    /// Interior samples, ascending in `phi`.
    pub samples: Vec<ZSample>,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z_lo: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub z_hi: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub slope_lo: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub slope_hi: f64,
    pub vanish_lo: bool,
    pub vanish_hi: bool,
}

impl ZCurve {
    /// Interpolated value: cubic Hermite between samples, a power law
    /// through a vanishing endpoint, linear toward a nonzero one.
    pub fn eval(&self, x: f64) -> f64 {
        let s = &self.samples;
        if s.is_empty() || x < self.lo || x > self.hi {
            return f64::NAN;
        }
        let first = s[0];
        let last = s[s.len() - 1];
        if x < first.phi {
            return end_model(x, self.lo, self.z_lo, self.vanish_lo, first, s.get(1).copied());
        }
        if x > last.phi {
            return end_model(x, self.hi, self.z_hi, self.vanish_hi, last, s.len().checked_sub(2).map(|i| s[i]));
        }
        let i = match s.binary_search_by(|p| p.phi.partial_cmp(&x).unwrap()) {
            Ok(i) => return s[i].z,
            Err(i) => i - 1,
        };
        hermite(s[i], s[i + 1], x)
    }

    /// Derivative of the interpolant.
    pub fn eval_dz(&self, x: f64) -> f64 {
        let s = &self.samples;
        if s.len() < 2 || x < self.lo || x > self.hi {
            return f64::NAN;
        }
        if x <= s[0].phi || x >= s[s.len() - 1].phi {
            let d = 1e-9 * (self.hi - self.lo);
            let (a, b) = if x - d < self.lo { (x, x + d) } else if x + d > self.hi { (x - d, x) } else { (x - d, x + d) };
            return (self.eval(b) - self.eval(a)) / (b - a);
        }
        let i = match s.binary_search_by(|p| p.phi.partial_cmp(&x).unwrap()) {
            Ok(i) => return s[i].dz,
            Err(i) => i - 1,
        };
        hermite_dz(s[i], s[i + 1], x)
    }

    /// Largest ODE residual `|z' - (h - c - q/z)| / (1 + |h - c| + |q/z|)`
    /// over interior samples, with `z'` from centered differences.
    pub fn residual(&self, q: &dyn Function, h: &dyn Function, c: f64) -> f64 {
        self.samples.windows(3).map(|w| window_residual(w, q, h, c)).fold(0.0, f64::max)
    }
}

/// Relative residual at the middle of three ascending samples, with the
/// derivative from the non-uniform centred difference.
fn window_residual(w: &[ZSample], q: &dyn Function, h: &dyn Function, c: f64) -> f64 {
    let (a, b, d) = (w[0], w[1], w[2]);
    let h1 = b.phi - a.phi;
    let h2 = d.phi - b.phi;
    if h1 <= 0.0 || h2 <= 0.0 {
        return 0.0;
    }
    let dz = -h2 / (h1 * (h1 + h2)) * a.z + (h2 - h1) / (h1 * h2) * b.z + h1 / (h2 * (h1 + h2)) * d.z;
    let hc = h.eval(b.phi) - c;
    let qz = q.eval(b.phi) / b.z;
    let r = (dz - (hc - qz)).abs() / (1.0 + hc.abs() + qz.abs());
    if r.is_finite() {
        r
    } else {
        0.0
    }
}

/// Relative spacing below which centred differences of stored samples
/// measure rounding rather than the curve.
const MIN_GAP: f64 = 1e-7;

/// Drop samples closer than `gap` to the last kept one, keeping the first.
fn thin(samples: &mut Vec<ZSample>, gap: f64) {
    let mut last = f64::NEG_INFINITY;
    samples.retain(|s| {
        let keep = s.phi - last >= gap;
        if keep {
            last = s.phi;
        }
        keep
    });
}

/// Target for [`densify`], a margin under the residual tolerance.
const DENSE_TARGET: f64 = 2e-7;

/// Re-integrate sample intervals where the centred-difference residual is
/// above [`DENSE_TARGET`], inserting the intermediate points. `samples` is
/// ascending. Intervals the explicit pair cannot cross, or too short to
/// split above `gap`, are left alone.
fn densify(samples: &mut Vec<ZSample>, p: &SingularProblem, opts: &OdeOptions, gap: f64) {
    let rhs = |x: f64, z: f64| p.h.eval(x) - p.c - p.q.eval(x) / z;
    for _ in 0..8 {
        let n = samples.len();
        let mut split = vec![false; n.saturating_sub(1)];
        for i in 1..n.saturating_sub(1) {
            if window_residual(&samples[i - 1..=i + 1], p.q.as_ref(), p.h.as_ref(), p.c) > DENSE_TARGET {
                split[i - 1] = true;
                split[i] = true;
            }
        }
        if !split.iter().any(|&b| b) {
            return;
        }
        let mut out = Vec::with_capacity(n + split.len());
        for i in 0..n {
            out.push(samples[i]);
            if i + 1 == n || !split[i] {
                continue;
            }
            let (a, b) = (samples[i], samples[i + 1]);
            let len = b.phi - a.phi;
            if len < 4.0 * gap {
                continue;
            }
            // integrate to the exact quarter points
            let mut cur = a;
            let mut extra = Vec::with_capacity(3);
            for k in 1..4 {
                let t = a.phi + len * k as f64 / 4.0;
                let (_, z, stop) = integrate(&rhs, cur.phi, cur.z, t, 0.25 * len, opts, |_, _, _| true);
                if stop != Stop::Reached {
                    break;
                }
                cur = ZSample { phi: t, z, dz: rhs(t, z) };
                extra.push(cur);
            }
            if extra.len() == 3 {
                out.extend(extra);
            }
        }
        *samples = out;
    }
}

/// Where `h - c` and `q / z` nearly cancel, the equation gives `z'` with
/// no correct digits. Next to a vanishing end `z` is locally a power of the
/// distance, so take `z' = p z / (phi - end)` with `p` fitted to the
/// neighbours.
fn repair_slopes(samples: &mut [ZSample], p: &SingularProblem, ends: [(f64, bool); 2]) {
    let n = samples.len();
    if n < 3 {
        return;
    }
    let fresh: Vec<f64> = (0..n)
        .map(|i| {
            let s = samples[i];
            let m = (p.h.eval(s.phi) - p.c).abs() + (p.q.eval(s.phi) / s.z).abs();
            if s.dz.abs() >= 1e-6 * m {
                return s.dz;
            }
            let (a, e) = (samples[i.saturating_sub(1)], samples[(i + 1).min(n - 1)]);
            let end = ends
                .iter()
                .filter(|(_, v)| *v)
                .map(|(x, _)| *x)
                .min_by(|x, y| (x - s.phi).abs().total_cmp(&(y - s.phi).abs()));
            if let Some(end) = end {
                let power = (e.z / a.z).ln() / ((e.phi - end) / (a.phi - end)).ln();
                if a.z * e.z > 0.0 && power.is_finite() {
                    return power * s.z / (s.phi - end);
                }
            }
            (e.z - a.z) / (e.phi - a.phi)
        })
        .collect();
    for (s, d) in samples.iter_mut().zip(fresh) {
        s.dz = d;
    }
}

fn hermite(a: ZSample, b: ZSample, x: f64) -> f64 {
    let h = b.phi - a.phi;
    let t = (x - a.phi) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * a.z
        + (t3 - 2.0 * t2 + t) * h * a.dz
        + (-2.0 * t3 + 3.0 * t2) * b.z
        + (t3 - t2) * h * b.dz
}

fn hermite_dz(a: ZSample, b: ZSample, x: f64) -> f64 {
    let h = b.phi - a.phi;
    let t = (x - a.phi) / h;
    let t2 = t * t;
    ((6.0 * t2 - 6.0 * t) * a.z + (-6.0 * t2 + 6.0 * t) * b.z) / h
        + (3.0 * t2 - 4.0 * t + 1.0) * a.dz
        + (3.0 * t2 - 2.0 * t) * b.dz
}

fn end_model(x: f64, end: f64, z_end: f64, vanish: bool, near: ZSample, next: Option<ZSample>) -> f64 {
    let d_near = (near.phi - end).abs();
    let d = (x - end).abs();
    if vanish {
        // local exponent of |z| ~ k d^p, from the two samples nearest the
        // end; z'/z = p / d is the fallback, and is unreliable where z is
        // far below the rounding level of h - c
        let fitted = next.and_then(|b| {
            let p = (b.z / near.z).ln() / ((b.phi - end).abs() / d_near).ln();
            (near.z * b.z > 0.0 && p.is_finite()).then_some(p)
        });
        let p = fitted.unwrap_or(near.dz * (near.phi - end) / near.z).clamp(1e-3, 50.0);
        let p = if p.is_finite() { p } else { 1.0 };
        near.z * (d / d_near).powf(p)
    } else {
        z_end + (near.z - z_end) * d / d_near
    }
}

/// Roots `m_minus <= 0 <= m_plus` of `m^2 - (h_end - c) m + qdot_end = 0`.
pub fn indicial_slopes(qdot_end: f64, h_end: f64, c: f64) -> Result<(f64, f64)> {
    if qdot_end > 0.0 {
        return Err(Error::Precondition(format!(
            "indicial quadratic needs a non-positive constant term, got {}",
            qdot_end
        )));
    }
    let b = h_end - c;
    let disc = (b * b - 4.0 * qdot_end).sqrt();
    // stable pairing of the two roots
    let (m1, m2) = if b >= 0.0 {
        let big = 0.5 * (b + disc);
        (if big != 0.0 { qdot_end / big } else { 0.0 }, big)
    } else {
        let big = 0.5 * (b - disc);
        (big, if big != 0.0 { qdot_end / big } else { 0.0 })
    };
    Ok((m1.min(m2), m1.max(m2)))
}

/// Least-squares fit `log q = log A + a log s` with `s = sigma2 - x`.
fn power_fit(q: &dyn Function, s2: f64, s_small: f64, s_big: f64) -> Option<(f64, f64)> {
    let n = 9;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        let t = i as f64 / (n - 1) as f64;
        let s = s_small * (s_big / s_small).powf(t);
        let v = q.eval(s2 - s);
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        let (lx, ly) = (s.ln(), v.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    let nf = n as f64;
    let a = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
    let b = (sy - a * sx) / nf;
    Some((a, b.exp()))
}

struct Seed {
    x: f64,
    z: f64,
    slope: f64,
}

fn seed(p: &SingularProblem) -> Result<Seed> {
    let w = p.width();
    let eps = 1e-6 * w;
    let x = p.sigma2 - eps;
    let s_big = (1e-3f64).min(0.1 * w);
    let s_small = (1e-6f64).min(1e-4 * w);
    let (a, _) = power_fit(p.q.as_ref(), p.sigma2, s_small, s_big)
        .ok_or_else(|| Error::Numerical("seed construction: q is not positive near sigma2".into()))?;
    let hc = p.h.eval(p.sigma2) - p.c;
    let scale = 1.0 + hc.abs();
    let power_slope = |a: f64| if 0.5 * (a + 1.0) < 1.0 { f64::INFINITY } else { 0.0 };
    let slope = if (a - 1.0).abs() <= 0.1 {
        let qdot = -p.q.eval(p.sigma2 - s_small) / s_small;
        let (_, m_plus) = indicial_slopes(qdot.min(0.0), hc, 0.0)?;
        if m_plus > 0.0 {
            m_plus
        } else {
            power_slope(a)
        }
    } else if a > 1.0 && hc > 1e-12 * scale {
        hc
    } else if a > 1.0 && hc < -1e-12 * scale {
        0.0
    } else {
        power_slope(a)
    };
    // z z' = (h - c) z - q integrated over [x, sigma2] with z ~ linear in
    // the drift: exact for the indicial root and for the pure power balance,
    // and it keeps non-Lipschitz drift such as h ~ d^(1/2)
    let drift = gauss_legendre(&|t| p.h.eval(t) - p.c, x, p.sigma2, 4);
    let mass = gauss_legendre(&|t| p.q.eval(t).max(0.0), x, p.sigma2, 4);
    let r = (drift * drift + 8.0 * mass).sqrt();
    let mut z = if drift >= 0.0 { -0.5 * (drift + r) } else { -4.0 * mass / (r - drift) };
    if slope == 0.0 {
        // leading order of the slow branch; the balance above is off by a
        // factor (a + 1) / 2 when q vanishes like d^a
        let slow = -p.q.eval(x) / (p.c - p.h.eval(x));
        if slow < 0.0 && slow.is_finite() {
            z = slow;
        }
    }
    let s = Seed { x, z, slope };
    if !(s.z < 0.0) || !s.z.is_finite() {
        return Err(Error::Numerical(format!("seed construction failed (z = {})", s.z)));
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy)]
enum Start {
    /// The solution vanishing at `sigma2`.
    Singular,
    /// `z(sigma2) = s < 0`.
    Value(f64),
}

struct Shot {
    /// Descending in `phi`.
    samples: Vec<ZSample>,
    z_lim: f64,
    vanishes: bool,
    seed_slope: f64,
    opts: OdeOptions,
}

fn aitken(z1: f64, z2: f64, z3: f64) -> f64 {
    let d1 = z2 - z1;
    let d2 = z3 - z2;
    let den = d2 - d1;
    if d1 * d2 > 0.0 && d2.abs() < d1.abs() && den != 0.0 {
        let v = z3 - d2 * d2 / den;
        if v.is_finite() {
            return v;
        }
    }
    z3
}

/// Bound on `|z(sigma1)|` given `z(x)`. Backward, `(z^2)' = 2z(h - c) - 2q`
/// only grows through `q` and the positive part `m` of `h - c`, so
/// `|z(sigma1)| <= |z(x)| + sqrt(2 int_sigma1^x q) + 2 m (x - sigma1)`.
struct VanishBound {
    s1: f64,
    cell: f64,
    q: Func,
    h: Func,
    c: f64,
    /// Running max of `(h - c)+` over `[sigma1, cell end]`.
    drift: Vec<f64>,
}

impl VanishBound {
    fn new(p: &SingularProblem) -> VanishBound {
        let n = 512;
        let cell = p.width() / n as f64;
        let mut drift = Vec::with_capacity(n);
        let mut m = 0.0f64;
        for i in 0..n {
            let a = p.sigma1 + cell * i as f64;
            for k in 0..=4 {
                m = m.max(p.h.eval(a + cell * k as f64 / 4.0) - p.c);
            }
            drift.push(1.05 * m);
        }
        VanishBound { s1: p.sigma1, cell, q: p.q.clone(), h: p.h.clone(), c: p.c, drift }
    }

    fn at(&self, x: f64, z: f64) -> f64 {
        let d = (x - self.s1).max(0.0);
        let i = ((d / self.cell) as usize).min(self.drift.len() - 1);
        let qf = |t: f64| self.q.eval(t).max(0.0);
        let iq = gauss_legendre(&qf, self.s1, x, 2);
        let energy = z.abs() + (2.0 * iq).sqrt() + 2.0 * self.drift[i] * d;
        energy.min(self.manifold(x, z))
    }

    /// With `c > h` on `[sigma1, x]`, `|z|` decreases backward wherever it
    /// exceeds `q / (c - h)`, so it stays below the larger of `|z(x)|` and
    /// `sup q / (c - h)`.
    fn manifold(&self, x: f64, z: f64) -> f64 {
        let d = x - self.s1;
        let mut r = z.abs();
        for k in 1..=16 {
            let t = self.s1 + d * k as f64 / 16.0;
            let gap = self.c - self.h.eval(t);
            if !(gap > 0.0) {
                return f64::INFINITY;
            }
            r = r.max(1.5 * self.q.eval(t).max(0.0) / gap);
        }
        r
    }
}

fn shoot(p: &SingularProblem, start: Start, cfg: &SolverConfig, record: bool) -> Result<Shot> {
    let w = p.width();
    let (x0, z0, slope, h0) = match start {
        Start::Singular => {
            let s = seed(p)?;
            (s.x, s.z, s.slope, 1e-7 * w)
        }
        Start::Value(s) => {
            if !(s < 0.0) {
                return Err(Error::Precondition(format!("terminal value must be negative, got {}", s)));
            }
            (p.sigma2, s, f64::NAN, 1e-6 * w)
        }
    };
    let scale = p.z_scale();
    let max_step = if record { 2.5e-4 * w } else { f64::INFINITY };
    let opts = OdeOptions { rtol: cfg.ode_rtol, atol: 1e-15 * scale, max_steps: 50_000, max_step };
    let stiff_opts = OdeOptions { max_steps: 400_000, ..opts };
    let (q, h, c) = (p.q.clone(), p.h.clone(), p.c);
    let rhs = |x: f64, z: f64| h.eval(x) - c - q.eval(x) / z;
    let mut samples = Vec::new();
    let mut x = x0;
    let mut z = z0;
    let mut hs = h0;
    let mut marks = [0.0; 3];
    let zero_tol = p.zero_tol(cfg);
    let bound = VanishBound::new(p);
    let mut halted = false;
    // Leaving sigma2 on the zero slope puts z on the slow branch
    // z ~ -q / (c - h) from the start, where the explicit pair can step
    // across zero.
    let slow = slope == 0.0;
    // there z falls like a power of the distance, so only relative error counts
    let stiff_opts = if slow { OdeOptions { atol: 1e-300, ..stiff_opts } } else { stiff_opts };
    for (i, rel) in [1e-6, 1e-9, 1e-12].iter().enumerate() {
        let target = p.sigma1 + rel * w;
        let mut observe = |xx: f64, zz: f64, dz: f64| {
            if record {
                samples.push(ZSample { phi: xx, z: zz, dz });
            }
            // Once z is this small the equation is stiff; stop when z at
            // the left end can no longer leave the zero band.
            !(zz.abs() < 0.1 * zero_tol && bound.at(xx, zz) <= 0.1 * zero_tol)
        };
        let (mut xe, mut ze, mut stop) = if slow {
            integrate_riccati(|t| h.eval(t) - c, |t| q.eval(t), x, z, target, hs, &stiff_opts, &mut observe)
        } else {
            integrate(&rhs, x, z, target, hs, &opts, &mut observe)
        };
        if let Stop::Stalled { x: xs, y: ys } = stop {
            if ys < 0.0 && ys.is_finite() {
                // explicit pair gave up, typically on the stiff slow branch
                // z ~ -q / (c - h); resume from the stall point
                let h0 = (1e-6 * w).min((xs - target).abs());
                (xe, ze, stop) = integrate_riccati(
                    |t| h.eval(t) - c,
                    |t| q.eval(t),
                    xs,
                    ys,
                    target,
                    h0,
                    &stiff_opts,
                    &mut observe,
                );
            }
        }
        match stop {
            Stop::Reached => {}
            Stop::Halted { .. } => {
                halted = true;
                break;
            }
            Stop::InteriorZero { x } => {
                return Err(Error::Numerical(format!("solution reached zero inside the interval at {}", x)))
            }
            Stop::Stalled { x, y } => {
                return Err(Error::Numerical(format!("integration stalled at phi = {}, z = {}", x, y)))
            }
        }
        if record && i > 0 {
            // drop the duplicated restart point
            let n = samples.len();
            if n >= 2 && samples[n - 1].phi == samples[n - 2].phi {
                samples.pop();
            }
        }
        marks[i] = ze;
        x = xe;
        z = ze;
        hs = 0.5 * (x - p.sigma1);
    }
    if record {
        samples.dedup_by(|a, b| a.phi == b.phi);
    }
    let z_lim = if halted { 0.0 } else { aitken(marks[0], marks[1], marks[2]).min(0.0) };
    let vanishes = halted || z_lim >= -zero_tol;
    Ok(Shot { samples, z_lim, vanishes, seed_slope: slope, opts })
}

fn curve_from_shot(p: &SingularProblem, shot: Shot, z_hi: f64) -> ZCurve {
    let mut samples = shot.samples;
    samples.reverse();
    let gap = MIN_GAP * p.width();
    thin(&mut samples, gap);
    densify(&mut samples, p, &shot.opts, gap);
    repair_slopes(&mut samples, p, [(p.sigma1, shot.vanishes), (p.sigma2, z_hi == 0.0)]);
    let slope_lo = samples.first().map(|s| s.dz).unwrap_or(f64::NAN);
    let slope_hi = if shot.seed_slope.is_nan() {
        samples.last().map(|s| s.dz).unwrap_or(f64::NAN)
    } else {
        shot.seed_slope
    };
    ZCurve {
        lo: p.sigma1,
        hi: p.sigma2,
        samples,
        z_lo: if shot.vanishes { 0.0 } else { shot.z_lim },
        z_hi,
        slope_lo,
        slope_hi,
        vanish_lo: shot.vanishes,
        vanish_hi: z_hi == 0.0,
    }
}

/// The solution `zeta_c` vanishing at `sigma2`, in canonical orientation.
pub fn solve_zeta(p: &SingularProblem, cfg: &SolverConfig) -> Result<ZCurve> {
    let shot = shoot(p, Start::Singular, cfg, true)?;
    Ok(curve_from_shot(p, shot, 0.0))
}

/// The solution with `z(sigma2) = s < 0`.
pub fn solve_terminal(p: &SingularProblem, s: f64, cfg: &SolverConfig) -> Result<ZCurve> {
    let shot = shoot(p, Start::Value(s), cfg, true)?;
    Ok(curve_from_shot(p, shot, s))
}

/// Left-end value `zeta_c(sigma1)` and whether it counts as zero.
pub fn zeta_left(p: &SingularProblem, cfg: &SolverConfig) -> Result<(f64, bool)> {
    let shot = shoot(p, Start::Singular, cfg, false)?;
    Ok((shot.z_lim, shot.vanishes))
}

/// Left-end value of the solution with `z(sigma2) = s`.
pub fn terminal_left(p: &SingularProblem, s: f64, cfg: &SolverConfig) -> Result<(f64, bool)> {
    let shot = shoot(p, Start::Value(s), cfg, false)?;
    Ok((shot.z_lim, shot.vanishes))
}

/// Analytic bounds on the critical speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CStarBounds {
    /// `sup` of the difference quotient of the flux at `sigma1`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sup_flux_quotient: f64,
    /// Lower right Dini derivative of `q` at `sigma1`.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub dini_lower_q: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub sup_q_quotient: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub lower: f64,
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub upper: f64,
    /// Integral-mean upper bound, present when `q` is differentiable at
    /// `sigma1`.
    #[serde(serialize_with = "crate::report::ser_opt_f64")]
    pub sharp_upper: Option<f64>,
}

impl CStarBounds {
    pub fn best_upper(&self) -> f64 {
        match self.sharp_upper {
            Some(s) => s.min(self.upper),
            None => self.upper,
        }
    }
}

/// Running means `(1/(x - sigma1)) int_sigma1^x F` on the grid of `(sigma1, sigma2]`.
fn running_means(f: &dyn Fn(f64) -> f64, s1: f64, s2: f64, grid: usize) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(grid);
    for i in 0..grid {
        let a = s1 + (s2 - s1) * i as f64 / grid as f64;
        let b = s1 + (s2 - s1) * (i + 1) as f64 / grid as f64;
        acc += gauss_legendre(f, a, b, 1);
        out.push(acc / (b - s1));
    }
    out
}

/// Lower bound `max{sup delta(f), h(sigma1) + 2 sqrt(D_+ q(sigma1))}` and
/// upper bound `sup delta(f) + 2 sqrt(sup delta(q))`, where `f` is any
/// antiderivative of `h`.
pub fn cstar_bounds(q: &Func, h: &Func, s1: f64, s2: f64, grid: usize) -> Result<CStarBounds> {
    let hf = |x: f64| h.eval(x);
    // Running means tend to h(sigma1) at the left end.
    let sup_f = running_means(&hf, s1, s2, grid).into_iter().fold(h.eval(s1), f64::max);
    let dl = dini_estimate(q.as_ref(), s1, Side::Right, Kind::Lower).value();
    let du = dini_estimate(q.as_ref(), s1, Side::Right, Kind::Upper).value();
    let sup_q = difference_quotient_sup(q.as_ref(), s1, s1, s2, grid)?;
    let lower = sup_f.max(h.eval(s1) + 2.0 * dl.max(0.0).sqrt());
    let upper = sup_f + 2.0 * sup_q.max(0.0).sqrt();
    let differentiable = dl.is_finite() && du.is_finite() && (du - dl).abs() <= 1e-3 * (1.0 + du.abs());
    let sharp_upper = if differentiable {
        let q0 = q.eval(s1);
        let ratio = |x: f64| (q.eval(x) - q0) / (x - s1);
        let m = running_means(&ratio, s1, s2, grid).into_iter().fold(du, f64::max);
        Some(sup_f + 2.0 * m.max(0.0).sqrt())
    } else {
        None
    };
    Ok(CStarBounds { sup_flux_quotient: sup_f, dini_lower_q: dl, sup_q_quotient: sup_q, lower, upper, sharp_upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CStar {
    /// `+∞` when no speed makes `zeta_c(sigma1)` vanish.
    #[serde(serialize_with = "crate::report::ser_f64")]
    pub value: f64,
    pub bounds: CStarBounds,
}

/// `c* = sup{c : zeta_c(sigma1) < 0}` by bisection on the monotone map
/// `c -> zeta_c(sigma1)`, starting from the analytic bounds.
pub fn compute_cstar(q: &Func, h: &Func, s1: f64, s2: f64, cfg: &SolverConfig) -> Result<CStar> {
    let bounds = cstar_bounds(q, h, s1, s2, cfg.grid)?;
    if bounds.lower == f64::INFINITY {
        return Ok(CStar { value: f64::INFINITY, bounds });
    }
    let base = SingularProblem::new(q.clone(), h.clone(), 0.0, s1, s2);
    let vanishes = |c: f64| zeta_left(&base.at_speed(c), cfg).map(|r| r.1);
    let mut lo = bounds.lower;
    // Below the lower bound zeta_c(sigma1) < 0 is a theorem; at the bound a
    // vanishing value pins c* there.
    if vanishes(lo)? {
        return Ok(CStar { value: lo, bounds });
    }
    let mut hi = bounds.best_upper();
    if !hi.is_finite() || hi <= lo {
        hi = lo + 1.0;
    }
    let mut k = 0;
    while !vanishes(hi)? {
        lo = hi;
        hi += 2f64.powi(k);
        k += 1;
        if k > 20 {
            return Ok(CStar { value: f64::INFINITY, bounds });
        }
    }
    while hi - lo > cfg.tol {
        let mid = 0.5 * (lo + hi);
        if vanishes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CStar { value: 0.5 * (lo + hi), bounds })
}

/// `beta(c) < 0`: a solution with `z(sigma1) = 0` and `z(sigma2) = s`
/// exists iff `s >= beta(c)`. Requires `c > c*`.
pub fn compute_beta(q: &Func, h: &Func, c: f64, s1: f64, s2: f64, cfg: &SolverConfig) -> Result<f64> {
    let p = SingularProblem::new(q.clone(), h.clone(), c, s1, s2);
    if !zeta_left(&p, cfg)?.1 {
        return Err(Error::Precondition(format!("speed {} does not exceed c* of this problem", c)));
    }
    let scale = p.z_scale();
    let ok = |s: f64| terminal_left(&p, s, cfg).map(|r| r.1);
    let mut far = -scale;
    let mut near = 0.0;
    let mut k = 0;
    while ok(far)? {
        near = far;
        far *= 2.0;
        k += 1;
        if k > 20 {
            return Err(Error::Bracket { what: "beta(c)".into() });
        }
    }
    if near == 0.0 {
        // shrink toward zero until an admissible value shows up
        let mut s = far;
        loop {
            s *= 0.5;
            if ok(s)? {
                near = s;
                break;
            }
            far = s;
            k += 1;
            if k > 60 {
                return Err(Error::Bracket { what: "beta(c)".into() });
            }
        }
    }
    while (near - far).abs() > 1e-9 * far.abs().max(scale * 1e-6) {
        let mid = 0.5 * (near + far);
        if ok(mid)? {
            near = mid;
        } else {
            far = mid;
        }
    }
    Ok(near)
}
