use serde::Serialize;

use super::function::Function;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DiniValue {
    Finite(f64),
    PosInf,
    NegInf,
}

impl DiniValue {
    pub fn value(self) -> f64 {
        match self {
            DiniValue::Finite(v) => v,
            DiniValue::PosInf => f64::INFINITY,
            DiniValue::NegInf => f64::NEG_INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, DiniValue::Finite(v) if v.is_finite())
    }
}

/// One-sided difference quotients of `f` at `x0` over steps `h0 2^-k`,
/// `k = 0..=40`, skipping steps below rounding resolution.
fn quotients(f: &dyn Function, x0: f64, side: Side) -> Vec<f64> {
    let f0 = f.eval(x0);
    let h0 = 1e-2;
    let floor = 1e-9 * x0.abs().max(1.0);
    let mut out = Vec::new();
    for k in 0..=40 {
        let h = h0 * 0.5f64.powi(k);
        if h < floor {
            break;
        }
        let x = match side {
            Side::Right => x0 + h,
            Side::Left => x0 - h,
        };
        let dx = x - x0;
        let q = (f.eval(x) - f0) / dx;
        if q.is_finite() {
            out.push(q);
        }
    }
    out
}

/// Estimate of a one-sided Dini derivative. The limsup/liminf is taken over
/// the last quotients of a geometric step sequence; a ±∞ flag is returned when
/// the quotients pass 1e9 or grow steadily in magnitude like a power law.
/// This is an approximation: true Dini derivatives are not computable from
/// samples.
pub fn dini_estimate(f: &dyn Function, x0: f64, side: Side, kind: Kind) -> DiniValue {
    let qs = quotients(f, x0, side);
    if qs.is_empty() {
        return DiniValue::Finite(f64::NAN);
    }
    let last = *qs.last().unwrap();
    let growing = qs.len() >= 13
        && qs[qs.len() - 13..]
            .windows(2)
            .all(|w| w[1].abs() > 1.03 * w[0].abs() && w[1].signum() == w[0].signum());
    if last.abs() > 1e9 || growing {
        return if last > 0.0 { DiniValue::PosInf } else { DiniValue::NegInf };
    }
    let tail = &qs[qs.len().saturating_sub(8)..];
    let v = match kind {
        Kind::Upper => tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        Kind::Lower => tail.iter().cloned().fold(f64::INFINITY, f64::min),
    };
    DiniValue::Finite(v)
}

/// Supremum of `(F(x) - F(x0)) / (x - x0)` over the uniform grid
/// `lo + (hi - lo) i / grid`, `i = 0..=grid`, skipping `x0` itself. When `x0`
/// is an endpoint the one-sided upper Dini derivative there joins the
/// supremum, which is `+∞` if that derivative is.
pub fn difference_quotient_sup(
    f: &dyn Function,
    x0: f64,
    lo: f64,
    hi: f64,
    grid: usize,
) -> Result<f64> {
    if !(hi > lo) || grid == 0 {
        return Err(Error::EmptyInterval { lo, hi });
    }
    let f0 = f.eval(x0);
    let mut best = f64::NEG_INFINITY;
    for i in 0..=grid {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        if (x - x0).abs() < 1e-14 {
            continue;
        }
        let q = (f.eval(x) - f0) / (x - x0);
        if q.is_finite() && q > best {
            best = q;
        }
    }
    let side = if x0 <= lo + 1e-14 {
        Some(Side::Right)
    } else if x0 >= hi - 1e-14 {
        Some(Side::Left)
    } else {
        None
    };
    if let Some(side) = side {
        let d = dini_estimate(f, x0, side, Kind::Upper);
        // A left quotient (f(x) - f(x0)) / (x - x0) with x < x0 equals the
        // left derivative; the sup is infinite when it diverges upward.
        if d == DiniValue::PosInf {
            return Ok(f64::INFINITY);
        }
        // The supremum over the open side includes the limit at `x0`.
        if d.is_finite() {
            best = best.max(d.value());
        }
    }
    Ok(best)
}
