// 10-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982_0,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre with `panels` equal panels.
pub fn gauss_legendre(f: &dyn Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    if a == b {
        return 0.0;
    }
    let w = (b - a) / panels as f64;
    let mut s = 0.0;
    for p in 0..panels {
        let m = a + (p as f64 + 0.5) * w;
        let r = 0.5 * w;
        for k in 0..5 {
            s += GL_W[k] * (f(m - r * GL_X[k]) + f(m + r * GL_X[k]));
        }
    }
    s * 0.5 * w
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_2,
    0.063_092_092_629_978_6,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let s = f(c - r * XGK[j]) + f(c + r * XGK[j]);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod (7, 15). Returns the estimate and the error
/// bound reached; NaN integrands propagate.
pub fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> (f64, f64) {
    let mut stack = vec![(a, b, 0usize)];
    let mut total = 0.0;
    let mut err = 0.0;
    let whole = gk15(f, a, b).0.abs();
    while let Some((lo, hi, depth)) = stack.pop() {
        let (v, e) = gk15(f, lo, hi);
        let share = (hi - lo).abs() / (b - a).abs().max(f64::MIN_POSITIVE);
        let tol = abs_tol.max(rel_tol * whole) * share.max(1e-12);
        if e <= tol || depth >= 40 || !v.is_finite() {
            total += v;
            err += e;
        } else {
            let m = 0.5 * (lo + hi);
            stack.push((lo, m, depth + 1));
            stack.push((m, hi, depth + 1));
        }
    }
    (total, err)
}

/// Convergence verdict of an improper integral toward one endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tail {
    Finite(f64),
    Infinite,
}

/// Oriented integral of `f` from the singular endpoint `end` to `inner`.
///
/// The range is split into geometric partitions shrinking toward `end`. The
/// integral is finite when the partition sums decay with ratio below 0.9 over
/// six consecutive partitions, infinite when the partial sum exceeds 1e6 or
/// the partitions run out without the ratio test passing.
pub fn improper_tail(f: &dyn Fn(f64) -> f64, inner: f64, end: f64) -> Tail {
    let len = inner - end;
    let floor = 1e-13 * end.abs().max(1.0);
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut streak = 0;
    let mut last_ratio = 1.0;
    let mut k = 0;
    loop {
        let outer = end + len * 0.5f64.powi(k);
        let near = end + len * 0.5f64.powi(k + 1);
        if (near - end).abs() < floor {
            break;
        }
        let (t, _) = adaptive(f, near, outer, 0.0, 1e-10);
        if !t.is_finite() {
            return Tail::Infinite;
        }
        sum += t;
        if sum.abs() > 1e6 {
            return Tail::Infinite;
        }
        if let Some(p) = prev {
            let ratio = if p != 0.0 { (t / p).abs() } else if t == 0.0 { 0.0 } else { 1.0 };
            if ratio < 0.9 {
                streak += 1;
                last_ratio = ratio;
            } else {
                streak = 0;
            }
        }
        prev = Some(t);
        k += 1;
        if streak >= 6 && t.abs() <= 1e-15 * sum.abs() {
            break;
        }
    }
    if streak >= 6 {
        let t = prev.unwrap_or(0.0);
        Tail::Finite(sum + t * last_ratio / (1.0 - last_ratio))
    } else {
        Tail::Infinite
    }
}
