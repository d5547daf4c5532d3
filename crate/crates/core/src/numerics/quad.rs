//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite and
//! semi-infinite intervals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{Breaks, CompensatedSum, QuadConfig, QuadValue};
use crate::error::{EvalError, QuadError};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Seeds with more integer boundaries than this fall back to bisection.
const MAX_INTEGER_SEEDS: f64 = 1_048_576.0;

/// Outcome of a finite-interval quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub err: f64,
    pub panels: usize,
}

/// Outcome of a quadrature over `[a, ∞)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemiInfiniteResult<T> {
    pub value: T,
    /// Quadrature error plus the tail bound.
    pub err: f64,
    /// Point beyond which the integral was discarded.
    pub truncation: f64,
    pub tail_bound: f64,
    pub panels: usize,
}

/// Decay model for the integrand on `[t0, ∞)`, used to choose a truncation
/// point whose discarded tail is below `tail_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailModel {
    /// `|g(t)| <= c * t^(-p)` for `t >= t0`.
    Power { p: f64, c: Option<f64>, t0: f64 },
    /// `|g(t)| <= c * exp(-s t)` for `t >= t0`.
    Exponential { s: f64, c: Option<f64>, t0: f64 },
}

impl TailModel {
    fn t0(&self) -> f64 {
        match *self {
            TailModel::Power { t0, .. } | TailModel::Exponential { t0, .. } => t0,
        }
    }
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    err: f64,
    depth: u32,
}

#[derive(PartialEq)]
struct Key {
    err: f64,
    idx: usize,
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

fn eval_checked<T, F>(f: &F, x: f64) -> Result<T, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    let v = f(x)?;
    if !v.is_finite() {
        return Err(EvalError::NonFinite { x }.into());
    }
    Ok(v)
}

/// One 15-point Kronrod evaluation with the QUADPACK error heuristic.
fn gk15<T, F>(f: &F, a: f64, b: f64) -> Result<(T, f64), QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let abs_half = half.abs();

    let fc = eval_checked(f, center)?;
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        fv1[j] = eval_checked(f, center - dx)?;
        fv2[j] = eval_checked(f, center + dx)?;
    }

    let mut result = T::zero();
    let mut err = 0.0f64;
    for p in 0..T::PARTS {
        let c = fc.part(p);
        let mut resk = c * WGK[7];
        let mut resg = c * WG[3];
        let mut resabs = resk.abs();
        for j in 0..7 {
            let (f1, f2) = (fv1[j].part(p), fv2[j].part(p));
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let reskh = 0.5 * resk;
        let mut resasc = WGK[7] * (c - reskh).abs();
        for j in 0..7 {
            resasc += WGK[j] * ((fv1[j].part(p) - reskh).abs() + (fv2[j].part(p) - reskh).abs());
        }
        let value = resk * half;
        resabs *= abs_half;
        resasc *= abs_half;
        let mut e = ((resk - resg) * half).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        result.set_part(p, value);
        err = err.max(e);
    }
    Ok((result, err))
}

fn split_point(a: f64, b: f64, breaks: Breaks) -> f64 {
    let mid = 0.5 * (a + b);
    if breaks == Breaks::Integers {
        let lo = a.floor() + 1.0;
        let hi = b.ceil() - 1.0;
        if lo <= hi {
            return mid.round().clamp(lo, hi);
        }
    }
    mid
}

fn integer_seeds(a: f64, b: f64, out: &mut Vec<f64>) {
    let lo = a.floor() + 1.0;
    let hi = b.ceil() - 1.0;
    if lo > hi || hi - lo > MAX_INTEGER_SEEDS {
        return;
    }
    let mut n = lo;
    while n <= hi {
        out.push(n);
        n += 1.0;
    }
}

/// Adaptive integration over consecutive seed panels given by sorted
/// `bounds` (at least two points).
fn adaptive<T, F>(f: &F, bounds: &[f64], breaks: Breaks, cfg: &QuadConfig) -> Result<QuadResult<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    let mut panels: Vec<Panel<T>> = Vec::with_capacity(bounds.len() * 2);
    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = 0.0;

    for w in bounds.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, err) = gk15(f, a, b)?;
        total = total.add(value);
        total_err += err;
        heap.push(Key { err, idx: panels.len() });
        panels.push(Panel { a, b, value, err, depth: 0 });
    }

    let mut iterations = 0usize;
    loop {
        let target = cfg.abs_tol.max(cfg.rel_tol * total.norm());
        if total_err <= target {
            break;
        }
        let Some(Key { idx, .. }) = heap.pop() else {
            return Err(depth_exceeded(&panels, total_err));
        };
        if panels.len() + 1 > cfg.max_panels {
            return Err(depth_exceeded(&panels, total_err));
        }
        let (a, b, depth) = (panels[idx].a, panels[idx].b, panels[idx].depth);
        let m = split_point(a, b, breaks);
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if depth >= cfg.max_depth || b - a <= 4.0 * f64::EPSILON * scale || m <= a || m >= b {
            // Frozen: its error stays in the total but it is never split again.
            continue;
        }
        let (v1, e1) = gk15(f, a, m)?;
        let (v2, e2) = gk15(f, m, b)?;
        total = total.add(panels[idx].value.scale(-1.0)).add(v1).add(v2);
        total_err += e1 + e2 - panels[idx].err;
        panels[idx] = Panel { a, b: m, value: v1, err: e1, depth: depth + 1 };
        heap.push(Key { err: e1, idx });
        heap.push(Key { err: e2, idx: panels.len() });
        panels.push(Panel { a: m, b, value: v2, err: e2, depth: depth + 1 });

        iterations += 1;
        if iterations % 1024 == 0 {
            total_err = panels.iter().map(|p| p.err).sum();
        }
    }

    let (value, err) = ordered_sum(&mut panels);
    Ok(QuadResult { value, err, panels: panels.len() })
}

/// Deterministic final sum: panels in order of their left endpoint, each
/// component compensated.
fn ordered_sum<T: QuadValue>(panels: &mut [Panel<T>]) -> (T, f64) {
    panels.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = T::zero();
    for part in 0..T::PARTS {
        let mut s = CompensatedSum::default();
        for p in panels.iter() {
            s.add(p.value.part(part));
        }
        value.set_part(part, s.value());
    }
    let mut e = CompensatedSum::default();
    for p in panels.iter() {
        e.add(p.err);
    }
    (value, e.value())
}

fn depth_exceeded<T: QuadValue>(panels: &[Panel<T>], _running_err: f64) -> QuadError {
    let mut sorted: Vec<&Panel<T>> = panels.iter().collect();
    sorted.sort_by(|p, q| p.a.total_cmp(&q.a));
    let mut value = vec![0.0; T::PARTS];
    for (part, slot) in value.iter_mut().enumerate() {
        let mut s = CompensatedSum::default();
        for p in &sorted {
            s.add(p.value.part(part));
        }
        *slot = s.value();
    }
    let err_est = panels.iter().map(|p| p.err).sum();
    QuadError::DepthExceeded { value, err_est }
}

/// Integrate `f` over `[a, b]` (either orientation).
pub fn quad<T, F>(f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<QuadResult<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    quad_with_breaks(f, a, b, Breaks::None, cfg)
}

/// Integrate `f` over `[a, b]`, forcing panel boundaries at `breaks`.
pub fn quad_with_breaks<T, F>(
    f: F,
    a: f64,
    b: f64,
    breaks: Breaks,
    cfg: &QuadConfig,
) -> Result<QuadResult<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    cfg.validate()?;
    if !a.is_finite() || !b.is_finite() {
        return Err(QuadError::InvalidInterval { a, b });
    }
    if a == b {
        return Ok(QuadResult { value: T::zero(), err: 0.0, panels: 0 });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut bounds = vec![lo];
    if breaks == Breaks::Integers {
        integer_seeds(lo, hi, &mut bounds);
    }
    bounds.push(hi);
    let mut r = adaptive(&f, &bounds, breaks, cfg)?;
    if sign < 0.0 {
        r.value = r.value.scale(-1.0);
    }
    Ok(r)
}

fn tail_constant<T, F>(f: &F, model: &TailModel) -> Result<f64, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    let t0 = model.t0();
    let mut c: f64 = 0.0;
    for i in 0..=48 {
        let t = t0 * 1e3f64.powf(i as f64 / 48.0);
        let g = eval_checked(f, t)?.norm();
        let w = match *model {
            TailModel::Power { p, .. } => t.powf(p),
            TailModel::Exponential { s, .. } => (s * t).exp(),
        };
        c = c.max(g * w);
    }
    Ok(2.0 * c)
}

fn truncation_point<T, F>(f: &F, a: f64, model: &TailModel, cfg: &QuadConfig) -> Result<(f64, f64), QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    let t0 = model.t0();
    if !(t0.is_finite() && t0 > 0.0) {
        return Err(QuadError::InvalidConfig(format!("tail start must be positive, got {t0}")));
    }
    let c = match *model {
        TailModel::Power { c: Some(c), .. } | TailModel::Exponential { c: Some(c), .. } => c,
        _ => tail_constant(f, model)?,
    };
    if !(c.is_finite() && c >= 0.0) {
        return Err(QuadError::InvalidConfig(format!("tail constant must be nonnegative, got {c}")));
    }
    let floor = t0.max(a + 1.0);
    if c == 0.0 {
        return Ok((floor, 0.0));
    }
    let (t, bound) = match *model {
        TailModel::Power { p, .. } => {
            if !(p > 1.0) {
                return Err(QuadError::DivergentTail(format!(
                    "integrand decays like t^-{p}, which is not integrable"
                )));
            }
            let t = (c / ((p - 1.0) * cfg.tail_tol)).powf(1.0 / (p - 1.0)).max(floor);
            (t, c * t.powf(1.0 - p) / (p - 1.0))
        }
        TailModel::Exponential { s, .. } => {
            if !(s > 0.0) {
                return Err(QuadError::DivergentTail(format!(
                    "exponential rate {s} is not positive"
                )));
            }
            let t = ((c / (s * cfg.tail_tol)).ln() / s).max(floor);
            (t, c * (-s * t).exp() / s)
        }
    };
    if t > 1e15 {
        return Err(QuadError::DivergentTail(format!(
            "truncation point {t:e} needed for tail tolerance {:e}",
            cfg.tail_tol
        )));
    }
    Ok((t, bound))
}

/// Integrate `f` over `[a, ∞)` by truncating at a point chosen from `tail`.
pub fn quad_semi_infinite<T, F>(
    f: F,
    a: f64,
    tail: TailModel,
    breaks: Breaks,
    cfg: &QuadConfig,
) -> Result<SemiInfiniteResult<T>, QuadError>
where
    T: QuadValue,
    F: Fn(f64) -> Result<T, EvalError>,
{
    cfg.validate()?;
    if !a.is_finite() {
        return Err(QuadError::InvalidInterval { a, b: f64::INFINITY });
    }
    let (truncation, tail_bound) = truncation_point(&f, a, &tail, cfg)?;

    let mut bounds = vec![a];
    if breaks == Breaks::Integers {
        let unit_end = truncation.min(a + MAX_INTEGER_SEEDS);
        integer_seeds(a, unit_end, &mut bounds);
        let mut x = unit_end;
        let mut step = 1.0f64;
        while x < truncation {
            bounds.push(x);
            step *= 2.0;
            x = (x + step).floor();
        }
    } else {
        let mut step = 1.0;
        let mut x = a + step;
        while x < truncation {
            bounds.push(x);
            step *= 2.0;
            x = a + step;
        }
    }
    if *bounds.last().unwrap() < truncation {
        bounds.push(truncation);
    }
    bounds.dedup();

    let r = adaptive(&f, &bounds, breaks, cfg)?;
    Ok(SemiInfiniteResult {
        value: r.value,
        err: r.err + tail_bound,
        truncation,
        tail_bound,
        panels: r.panels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Vector;
    use num_complex::Complex64;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn polynomial_is_exact() {
        let r = quad(|x| Ok(x.powi(5) - 3.0 * x * x), 0.0, 2.0, &cfg()).unwrap();
        assert!((r.value - (64.0 / 6.0 - 8.0)).abs() < 1e-13);
        assert_eq!(r.panels, 1);
    }

    #[test]
    fn reversed_interval_negates() {
        let fwd = quad(|x: f64| Ok(x.sin()), 0.0, 1.0, &cfg()).unwrap();
        let rev = quad(|x: f64| Ok(x.sin()), 1.0, 0.0, &cfg()).unwrap();
        assert_eq!(fwd.value, -rev.value);
    }

    #[test]
    fn sqrt_endpoint_singularity() {
        let r = quad(|x: f64| Ok(x.sqrt()), 0.0, 1.0, &cfg()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-9);
        assert!(r.err <= 1e-8);
    }

    #[test]
    fn floor_with_integer_breaks() {
        let r = quad_with_breaks(|x: f64| Ok(x.floor()), 0.0, 10.5, Breaks::Integers, &cfg()).unwrap();
        assert!((r.value - (45.0 + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn complex_values() {
        let r = quad(|x: f64| Ok(Complex64::new(x.cos(), x.sin())), 0.0, 1.0, &cfg()).unwrap();
        assert!((r.value.re - 1f64.sin()).abs() < 1e-12);
        assert!((r.value.im - (1.0 - 1f64.cos())).abs() < 1e-12);
    }

    #[test]
    fn vector_values() {
        let r = quad(|x: f64| Ok(Vector([1.0, x, x * x])), 0.0, 3.0, &cfg()).unwrap();
        assert!((r.value.0[0] - 3.0).abs() < 1e-13);
        assert!((r.value.0[1] - 4.5).abs() < 1e-13);
        assert!((r.value.0[2] - 9.0).abs() < 1e-13);
    }

    #[test]
    fn integrand_error_propagates() {
        let r = quad(|x: f64| if x > 0.5 { Err(EvalError::NonFinite { x }) } else { Ok(1.0) }, 0.0, 1.0, &cfg());
        assert!(matches!(r, Err(QuadError::Integrand(_))));
    }

    #[test]
    fn depth_limit_reports_best_value() {
        let tight = QuadConfig { abs_tol: 1e-300, rel_tol: 1e-300, max_depth: 12, ..cfg() };
        match quad(|x: f64| Ok(if x < 1.0 / 3.0 { 0.0 } else { 1.0 }), 0.0, 1.0, &tight) {
            Err(QuadError::DepthExceeded { value, err_est }) => {
                assert_eq!(value.len(), 1);
                assert!(err_est > 0.0);
            }
            other => panic!("expected depth error, got {other:?}"),
        }
    }

    #[test]
    fn semi_infinite_power_tail() {
        let tail = TailModel::Power { p: 2.0, c: Some(1.0), t0: 1.0 };
        let r = quad_semi_infinite(|x: f64| Ok(1.0 / ((1.0 + x) * (1.0 + x))), 0.0, tail, Breaks::None, &cfg())
            .unwrap();
        assert!((r.value - 1.0).abs() <= r.err);
        assert!(r.tail_bound <= cfg().tail_tol * (1.0 + 1e-9));
    }

    #[test]
    fn semi_infinite_exponential_estimated_constant() {
        let tail = TailModel::Exponential { s: 1.0, c: None, t0: 1.0 };
        let r = quad_semi_infinite(|x: f64| Ok((-x).exp()), 0.0, tail, Breaks::None, &cfg()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn divergent_tail_rejected() {
        let tail = TailModel::Power { p: 1.0, c: Some(1.0), t0: 1.0 };
        let r = quad_semi_infinite(|x: f64| Ok(1.0 / (1.0 + x)), 0.0, tail, Breaks::None, &cfg());
        assert!(matches!(r, Err(QuadError::DivergentTail(_))));
    }

    #[test]
    fn invalid_config_rejected() {
        let bad = QuadConfig { abs_tol: -1.0, ..cfg() };
        assert!(matches!(quad(|_| Ok(1.0), 0.0, 1.0, &bad), Err(QuadError::InvalidConfig(_))));
    }
}
