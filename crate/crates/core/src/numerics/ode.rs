//! Dormand-Prince 5(4) for scalar equations whose solution must keep a
//! fixed strict sign.

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Upper bound on the step, for callers that keep the accepted points.
    pub max_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stop {
    Reached,
    /// The solution hit zero before `x_end`.
    InteriorZero { x: f64 },
    /// Step size collapsed or the right-hand side stopped being finite.
    Stalled { x: f64, y: f64 },
    /// The observer asked to stop.
    Halted { x: f64, y: f64 },
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrate `y' = rhs(x, y)` from `(x0, y0)` to `x_end` (either
/// direction). `y0` must be nonzero; trial steps that would change its sign
/// are rejected and retried with a smaller step. `observe` sees every
/// accepted point with its derivative, including the initial one, and
/// returns `false` to halt.
pub fn integrate<F, O>(
    rhs: F,
    x0: f64,
    y0: f64,
    x_end: f64,
    h0: f64,
    opts: &OdeOptions,
    mut observe: O,
) -> (f64, f64, Stop)
where
    F: Fn(f64, f64) -> f64,
    O: FnMut(f64, f64, f64) -> bool,
{
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let sign = y0.signum();
    let mut x = x0;
    let mut y = y0;
    let mut k1 = rhs(x, y);
    if !k1.is_finite() {
        return (x, y, Stop::Stalled { x, y });
    }
    if !observe(x, y, k1) {
        return (x, y, Stop::Halted { x, y });
    }
    let span = (x_end - x0).abs();
    let mut h = h0.abs().min(span).max(1e-300);
    let h_min = 1e-15 * x0.abs().max(x_end.abs()).max(1.0);
    let ok = |v: f64| v.is_finite() && v.signum() == sign && v != 0.0;
    for _ in 0..opts.max_steps {
        let left = (x_end - x) * dir;
        if left <= 0.0 {
            return (x, y, Stop::Reached);
        }
        h = h.min(opts.max_step);
        let last = h >= left;
        if last {
            h = left;
        }
        let s = dir * h;
        let trial = (|| {
            let y2 = y + s * A21 * k1;
            if !ok(y2) {
                return None;
            }
            let k2 = rhs(x + C2 * s, y2);
            let y3 = y + s * (A31 * k1 + A32 * k2);
            if !ok(y3) {
                return None;
            }
            let k3 = rhs(x + C3 * s, y3);
            let y4 = y + s * (A41 * k1 + A42 * k2 + A43 * k3);
            if !ok(y4) {
                return None;
            }
            let k4 = rhs(x + C4 * s, y4);
            let y5 = y + s * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4);
            if !ok(y5) {
                return None;
            }
            let k5 = rhs(x + C5 * s, y5);
            let y6 = y + s * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5);
            if !ok(y6) {
                return None;
            }
            let k6 = rhs(x + s, y6);
            let yn = y + s * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            if !ok(yn) {
                return None;
            }
            let k7 = rhs(x + s, yn);
            if ![k2, k3, k4, k5, k6, k7].iter().all(|k| k.is_finite()) {
                return None;
            }
            let err = s * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            Some((yn, k7, err))
        })();
        match trial {
            Some((yn, k7, err)) => {
                let scale = opts.atol + opts.rtol * y.abs().max(yn.abs());
                let e = (err / scale).abs();
                if e <= 1.0 {
                    x = if last { x_end } else { x + s };
                    y = yn;
                    k1 = k7;
                    if !observe(x, y, k1) {
                        return (x, y, Stop::Halted { x, y });
                    }
                    let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.2)).clamp(0.2, 5.0) };
                    h *= fac;
                } else {
                    h *= (0.9 * e.powf(-0.2)).clamp(0.1, 0.9);
                }
            }
            None => {
                h *= 0.25;
            }
        }
        if h < h_min {
            if (x_end - x) * dir <= 0.0 {
                return (x, y, Stop::Reached);
            }
            if y.abs() < 1e-12 {
                return (x, y, Stop::InteriorZero { x });
            }
            return (x, y, Stop::Stalled { x, y });
        }
    }
    (x, y, Stop::Stalled { x, y })
}

/// Root of `y^2 - b y + c = 0` with the given sign, closest to `near`.
fn signed_root(b: f64, c: f64, sign: f64, near: f64) -> Option<f64> {
    let disc = b * b - 4.0 * c;
    if !(disc >= 0.0) {
        return None;
    }
    let big = 0.5 * (b + b.signum() * disc.sqrt());
    let roots = if big == 0.0 { [0.0, 0.0] } else { [big, c / big] };
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r != 0.0 && r.signum() == sign)
        .min_by(|a, b| (a - near).abs().total_cmp(&(b - near).abs()))
}

/// Stiff integrator for `y' = a(x) - b(x) / y`, the form the singular
/// equation takes once `y` is small. L-stable SDIRK2 (Alexander); each
/// implicit stage is a quadratic in `y` and solved in closed form, and a
/// backward Euler companion gives the error estimate. Same contract as
/// [`integrate`].
pub fn integrate_riccati<A, B, O>(
    a: A,
    b: B,
    x0: f64,
    y0: f64,
    x_end: f64,
    h0: f64,
    opts: &OdeOptions,
    mut observe: O,
) -> (f64, f64, Stop)
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
    O: FnMut(f64, f64, f64) -> bool,
{
    const G: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let sign = y0.signum();
    let rhs = |x: f64, y: f64| a(x) - b(x) / y;
    // y = base + w s (a(xs) - b(xs) / y)
    let stage = |xs: f64, base: f64, ws: f64| signed_root(base + ws * a(xs), ws * b(xs), sign, base);
    let mut x = x0;
    let mut y = y0;
    let k0 = rhs(x, y);
    if !k0.is_finite() {
        return (x, y, Stop::Stalled { x, y });
    }
    if !observe(x, y, k0) {
        return (x, y, Stop::Halted { x, y });
    }
    let span = (x_end - x0).abs();
    let mut h = h0.abs().min(span).max(1e-300);
    let h_min = 1e-15 * x0.abs().max(x_end.abs()).max(1.0);
    for _ in 0..opts.max_steps {
        let left = (x_end - x) * dir;
        if left <= 0.0 {
            return (x, y, Stop::Reached);
        }
        h = h.min(opts.max_step);
        let last = h >= left;
        if last {
            h = left;
        }
        let s = dir * h;
        let trial = (|| {
            let x1 = x + G * s;
            let y1 = stage(x1, y, G * s)?;
            let k1 = (y1 - y) / (G * s);
            let xn = if last { x_end } else { x + s };
            let yn = stage(xn, y + (1.0 - G) * s * k1, G * s)?;
            let ybe = stage(xn, y, s)?;
            Some((xn, yn, yn - ybe))
        })();
        match trial {
            Some((xn, yn, err)) => {
                let scale = opts.atol + opts.rtol * y.abs().max(yn.abs());
                let e = (err / scale).abs();
                if e <= 1.0 {
                    x = xn;
                    y = yn;
                    let k = rhs(x, y);
                    if !k.is_finite() {
                        return (x, y, Stop::Stalled { x, y });
                    }
                    if !observe(x, y, k) {
                        return (x, y, Stop::Halted { x, y });
                    }
                    let fac = if e == 0.0 { 5.0 } else { (0.9 * e.powf(-0.5)).clamp(0.2, 5.0) };
                    h *= fac;
                } else {
                    h *= (0.9 * e.powf(-0.5)).clamp(0.1, 0.9);
                }
            }
            None => h *= 0.25,
        }
        if h < h_min {
            if (x_end - x) * dir <= 0.0 {
                return (x, y, Stop::Reached);
            }
            return (x, y, Stop::Stalled { x, y });
        }
    }
    (x, y, Stop::Stalled { x, y })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-14, max_steps: 10_000, max_step: f64::INFINITY };
        let (_, y, stop) = integrate(|_, y| -y, 0.0, 1.0, 2.0, 0.1, &opts, |_, _, _| true);
        assert_eq!(stop, Stop::Reached);
        assert!((y - (-2.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn backward_direction() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-14, max_steps: 10_000, max_step: f64::INFINITY };
        let (_, y, _) = integrate(|x, _| 2.0 * x, 1.0, 2.0, 0.0, 0.1, &opts, |_, _, _| true);
        assert!((y - 1.0).abs() < 1e-9);
    }

    #[test]
    fn tiny_final_remainder_still_reaches_the_end() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-16, max_steps: 100, max_step: 0.25 * 2.087620548679725e-5 };
        let (a, b) = (0.2194936895152126, 0.21951456572069938);
        let (x, _, stop) = integrate(|_, _| 1.0, a, 1.0, b, 1.0, &opts, |_, _, _| true);
        assert_eq!((x, stop), (b, Stop::Reached));
    }

    #[test]
    fn reports_interior_zero() {
        let opts = OdeOptions { rtol: 1e-10, atol: 1e-16, max_steps: 100_000, max_step: f64::INFINITY };
        // y = 1 - x reaches zero at x = 1.
        let (_, _, stop) = integrate(|_, _| -1.0, 0.0, 1.0, 2.0, 0.1, &opts, |_, _, _| true);
        assert!(matches!(stop, Stop::InteriorZero { .. }));
    }

    #[test]
    fn riccati_tracks_the_slow_branch() {
        // non-stiff: agrees with the explicit pair
        let opts = OdeOptions { rtol: 1e-9, atol: 1e-15, max_steps: 200_000, max_step: f64::INFINITY };
        let (_, ye, se) = integrate(|x, y| -3.0 - x / y, 1.0, -0.1, 0.2, 1e-4, &opts, |_, _, _| true);
        let (_, yi, si) = integrate_riccati(|_| -3.0, |x| x, 1.0, -0.1, 0.2, 1e-4, &opts, |_, _, _| true);
        assert_eq!((se, si), (Stop::Reached, Stop::Reached));
        assert!((ye - yi).abs() < 1e-6 * ye.abs(), "{ye} {yi}");
    }

    #[test]
    fn riccati_is_stable_where_the_explicit_pair_is_not() {
        // backward from x = 1 with c = 1e3: y sits near -x/1e3
        let opts = OdeOptions { rtol: 1e-8, atol: 1e-15, max_steps: 20_000, max_step: f64::INFINITY };
        let (_, _, se) = integrate(|x, y| -1e3 - x / y, 1.0, -1e-3, 0.01, 1e-6, &opts, |_, _, _| true);
        assert!(matches!(se, Stop::Stalled { .. }));
        let (_, y, si) = integrate_riccati(|_| -1e3, |x| x, 1.0, -1e-3, 0.01, 1e-6, &opts, |_, _, _| true);
        assert_eq!(si, Stop::Reached);
        assert!((y + 0.01 / 1e3).abs() < 1e-3 * 1e-5, "{y}");
    }
}
