//! Cesàro asymptotics `W(x) ~ γ x^α (C)` at infinity.
//!
//! For `W = f/H^k` a claim `(α, γ, k, p)` asserts
//! `Γ(α+k+1) f(x) = p(x) + γ x^{α+k} + o(x^{α+k})` with `deg p <= k-1`.
//! Limits are checked on finite geometric windows, so every check has a
//! third, inconclusive outcome.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, CPlusFunction, Operator};
use crate::error::{EvalError, FitError, QuadError, SpecialError};
use crate::localization::{vanishes_on_with, IntervalReport, LocalizationError, ProbeOptions};
use crate::numerics::{quad_semi_infinite, weighted_lstsq, TailModel};
use crate::special::gamma;

/// Smallest accepted `hi / lo` for a window.
pub const MIN_WINDOW_RATIO: f64 = 1e3;
/// Successive abscissae differ by at least this factor.
pub const MIN_GEOMETRIC_RATIO: f64 = 1.3;
const MAX_SAMPLES: usize = 48;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CesaroError {
    #[error("exponent {0} is excluded (negative integer)")]
    Excluded(f64),
    #[error("claim is at level {claim} but the operator is at level {operator}; lift first")]
    LevelMismatch { claim: u32, operator: u32 },
    #[error("polynomial part has degree {degree}, above k-1 = {max}")]
    PolynomialDegree { degree: usize, max: usize },
    #[error("invalid window: {0}")]
    Window(String),
    #[error("ill-conditioned basis: {0}")]
    IllConditioned(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Localization(#[from] LocalizationError),
}

impl From<EvalError> for CesaroError {
    fn from(e: EvalError) -> Self {
        CesaroError::Algebra(e.into())
    }
}

fn is_excluded(a: f64) -> bool {
    a <= -1.0 && a == a.round()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroClaim {
    pub alpha: f64,
    pub gamma: f64,
    pub k: u32,
    /// Coefficients of `p`, constant first, at most `k` of them.
    pub p: Vec<f64>,
}

impl CesaroClaim {
    pub fn new(alpha: f64, gamma: f64, k: u32, p: Vec<f64>) -> Result<Self, CesaroError> {
        if !alpha.is_finite() || is_excluded(alpha) {
            return Err(CesaroError::Excluded(alpha));
        }
        if k == 0 {
            return Err(AlgebraError::InvalidLevel(0).into());
        }
        let mut p = p;
        while p.last() == Some(&0.0) {
            p.pop();
        }
        if p.len() > k as usize {
            return Err(CesaroError::PolynomialDegree { degree: p.len() - 1, max: k as usize - 1 });
        }
        Ok(CesaroClaim { alpha, gamma, k, p })
    }

    /// `Γ(α+k+1)`, the normalization at this level.
    pub fn normalization(&self) -> Result<f64, CesaroError> {
        Ok(gamma(self.alpha + self.k as f64 + 1.0)?)
    }

    pub fn exponent(&self) -> f64 {
        self.alpha + self.k as f64
    }
}

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_abs_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x.abs() + c.abs())
}

/// `∫_0^x p`.
fn poly_primitive(p: &[f64]) -> Vec<f64> {
    if p.is_empty() {
        return Vec::new();
    }
    std::iter::once(0.0).chain(p.iter().enumerate().map(|(j, &c)| c / (j + 1) as f64)).collect()
}

fn poly_combine(a: f64, p: &[f64], b: f64, q: &[f64]) -> Vec<f64> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| a * p.get(i).copied().unwrap_or(0.0) + b * q.get(i).copied().unwrap_or(0.0))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
    PreconditionFailed,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub verdict: Verdict,
    pub pass: bool,
    pub target: f64,
    pub abscissae: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Bound on the error of each ratio from evaluation and rounding.
    pub errors: Vec<f64>,
    /// Aitken extrapolation over the last third, or its mean when the
    /// deviations are not geometric.
    pub tail_estimate: f64,
    pub max_deviation_last: f64,
    pub max_deviation_middle: f64,
    /// Absolute tolerance actually applied, `tol * max(1, |target|)`.
    pub tol: f64,
}

fn geometric_abscissae(window: (f64, f64)) -> Result<Vec<f64>, CesaroError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi.is_finite() && hi / lo >= MIN_WINDOW_RATIO * (1.0 - 1e-12)) {
        return Err(CesaroError::Window(format!(
            "need 0 < lo and hi/lo >= {MIN_WINDOW_RATIO:e}, got ({lo}, {hi})"
        )));
    }
    let span = (hi / lo).ln();
    let n = ((1.0 + span / MIN_GEOMETRIC_RATIO.ln()).floor() as usize).min(MAX_SAMPLES);
    Ok((0..n).map(|i| lo * (span * i as f64 / (n - 1) as f64).exp()).collect())
}

/// Judge convergence of sampled ratios to `target`.
fn judge(xs: Vec<f64>, ratios: Vec<f64>, errors: Vec<f64>, target: f64, tol: f64) -> VerifyReport {
    let n = ratios.len();
    let third = n / 3;
    let last = &ratios[n - third..];
    let middle = &ratios[n - 2 * third..n - third];
    let dev = |s: &[f64]| s.iter().map(|r| (r - target).abs()).fold(0.0, f64::max);
    let max_last = dev(last);
    let max_middle = dev(middle);
    let abs_tol = tol * target.abs().max(1.0);
    let max_err = errors[n - third..].iter().copied().fold(0.0, f64::max);

    let mean = last.iter().sum::<f64>() / last.len() as f64;
    let s = (third / 2).max(1);
    let (r0, r1, r2) = (ratios[n - 1 - 2 * s], ratios[n - 1 - s], ratios[n - 1]);
    let (d1, d2) = (r1 - r0, r2 - r1);
    let tail_estimate = if d1 != 0.0 && d2 != 0.0 && d1.signum() == d2.signum() && d2.abs() < d1.abs() {
        r2 - d2 * d2 / (d2 - d1)
    } else {
        mean
    };

    let finite = ratios.iter().all(|r| r.is_finite());
    let verdict = if !finite || max_err > abs_tol / 10.0 {
        Verdict::Inconclusive
    } else if max_last <= abs_tol && max_last <= max_middle + 0.1 * abs_tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    VerifyReport {
        verdict,
        pass: verdict == Verdict::Pass,
        target,
        abscissae: xs,
        ratios,
        errors,
        tail_estimate,
        max_deviation_last: max_last,
        max_deviation_middle: max_middle,
        tol: abs_tol,
    }
}

fn sample<F>(xs: &[f64], f: F) -> Result<Vec<(f64, f64)>, CesaroError>
where
    F: Fn(f64) -> Result<(f64, f64), CesaroError> + Sync,
{
    xs.par_iter().map(|&x| f(x)).collect()
}

/// Check `(Γ(α+k+1) f(x) - p(x)) / x^{α+k} → γ` on the window.
pub fn verify_claim(w: &Operator, claim: &CesaroClaim, window: (f64, f64), tol: f64) -> Result<VerifyReport, CesaroError> {
    if claim.k != w.k {
        return Err(CesaroError::LevelMismatch { claim: claim.k, operator: w.k });
    }
    let xs = geometric_abscissae(window)?;
    let g = claim.normalization()?;
    let e = claim.exponent();
    let rows = sample(&xs, |x| {
        let v = w.num.eval_est(x)?;
        let px = poly_eval(&claim.p, x);
        let scale = x.powf(e);
        let rounding = 4.0 * f64::EPSILON * ((g * v.value).abs() + poly_abs_eval(&claim.p, x));
        Ok(((g * v.value - px) / scale, (g.abs() * v.err + rounding) / scale))
    })?;
    let (ratios, errors) = rows.into_iter().unzip();
    Ok(judge(xs, ratios, errors, claim.gamma, tol))
}

/// Fitted claim with the regression diagnostics and the check of the fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CesaroEstimate {
    pub claim: CesaroClaim,
    /// RMS of the relative residuals `r_i / x_i^{α+k}`.
    pub residual_rms: f64,
    pub max_residual: f64,
    pub witness: f64,
    pub condition: f64,
    pub verify: VerifyReport,
}

/// Regress `Γ(α+k+1) f` on `{1, x, …, x^{k-1}, x^{α+k}}` with rows scaled by
/// `x^{-(α+k)}`; `γ` is the last coefficient.
pub fn estimate(w: &Operator, alpha: f64, window: (f64, f64)) -> Result<CesaroEstimate, CesaroError> {
    if is_excluded(alpha) || !alpha.is_finite() {
        return Err(CesaroError::Excluded(alpha));
    }
    let k = w.k as usize;
    let e = alpha + k as f64;
    let nearest = e.round();
    if (0.0..k as f64).contains(&nearest) && (e - nearest).abs() < 0.05 {
        return Err(CesaroError::IllConditioned(format!(
            "α+k = {e} is within 0.05 of the polynomial degree {nearest}; widen the window or shift α"
        )));
    }
    let g = gamma(e + 1.0)?;
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(CesaroError::Window(format!("({lo}, {hi})")));
    }
    let n = MAX_SAMPLES;
    let span = (hi / lo).ln();
    let xs: Vec<f64> = (0..n).map(|i| lo * (span * i as f64 / (n - 1) as f64).exp()).collect();
    let values = sample(&xs, |x| Ok((w.num.eval(x)?, 0.0)))?;
    let mut columns: Vec<Vec<f64>> = (0..k).map(|j| xs.iter().map(|&x| x.powi(j as i32) / x.powf(e)).collect()).collect();
    columns.push(vec![1.0; n]);
    let rhs: Vec<f64> = xs.iter().zip(&values).map(|(&x, v)| g * v.0 / x.powf(e)).collect();
    let sol = weighted_lstsq(&columns, &rhs, None)?;
    let gamma_hat = sol.coeffs[k];
    let p: Vec<f64> = sol.coeffs[..k].to_vec();
    let claim = CesaroClaim::new(alpha, gamma_hat, w.k, p)?;
    let tol = (3.0 * sol.residual_rms).max(1e-12) / gamma_hat.abs().max(1.0);
    let verify = verify_claim(w, &claim, window, tol)?;
    Ok(CesaroEstimate {
        claim,
        residual_rms: sol.residual_rms,
        max_residual: sol.max_residual,
        witness: xs[sol.witness],
        condition: sol.condition,
        verify,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaVerdict {
    /// Clean power behavior with exponent `alpha`.
    Power,
    /// The numerator is a polynomial of degree `< k` plus a part that does
    /// not grow faster than `x^{slope}`: `γ = 0` for every admissible
    /// `α > slope - k` (every `α` when `alpha_floor` is absent).
    Dominated,
    NoPowerBehavior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaEstimate {
    pub verdict: AlphaVerdict,
    pub alpha: f64,
    pub band: f64,
    /// Exponent fits `α + k` on the three sub-decades of the top decade.
    pub sub_exponents: Vec<f64>,
    /// Envelope growth of `f` minus its best polynomial of degree `k-1`.
    pub envelope_slope: f64,
    pub alpha_floor: Option<f64>,
}

/// Relative residual of the best fit by `{1, …, x^{k-1}, x^β}`.
fn projection_residual(xs: &[f64], ys: &[f64], k: usize, beta: f64) -> Option<f64> {
    let c = xs[xs.len() / 2];
    let mut columns: Vec<Vec<f64>> = (0..k).map(|j| xs.iter().map(|&x| (x / c).powi(j as i32)).collect()).collect();
    columns.push(xs.iter().map(|&x| (x / c).powf(beta)).collect());
    let sol = weighted_lstsq(&columns, ys, None).ok()?;
    let scale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    Some(sol.residual_rms / scale)
}

/// Variable projection over the exponent: coarse scan, then golden section.
fn best_exponent(xs: &[f64], ys: &[f64], k: usize) -> Option<(f64, f64)> {
    let obj = |b: f64| projection_residual(xs, ys, k, b).unwrap_or(f64::INFINITY);
    let mut best = (f64::INFINITY, 0.0);
    let mut b = -6.0;
    while b <= 16.0 {
        let v = obj(b);
        if v < best.0 {
            best = (v, b);
        }
        b += 0.05;
    }
    if !best.0.is_finite() {
        return None;
    }
    let (mut lo, mut hi) = (best.1 - 0.05, best.1 + 0.05);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    while hi - lo > 1e-7 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = obj(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = obj(x2);
        }
    }
    let b = 0.5 * (lo + hi);
    Some((b, obj(b)))
}

/// Candidate `α` from the top decade of the window.
pub fn estimate_alpha(w: &Operator, window: (f64, f64)) -> Result<AlphaEstimate, CesaroError> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(CesaroError::Window(format!("({lo}, {hi})")));
    }
    let k = w.k as usize;
    let top = (hi / 10.0).max(lo);
    let span = (hi / top).ln();
    let per = 16;
    let mut subs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for s in 0..3 {
        let a = top * (span * s as f64 / 3.0).exp();
        let b = top * (span * (s + 1) as f64 / 3.0).exp();
        let xs: Vec<f64> = (0..per).map(|i| a * ((b / a).ln() * i as f64 / (per - 1) as f64).exp()).collect();
        let ys: Vec<f64> = sample(&xs, |x| Ok((w.num.eval(x)?, 0.0)))?.into_iter().map(|v| v.0).collect();
        subs.push((xs, ys));
    }
    let all_x: Vec<f64> = subs.iter().flat_map(|s| s.0.clone()).collect();
    let all_y: Vec<f64> = subs.iter().flat_map(|s| s.1.clone()).collect();
    let scale = all_y.iter().map(|y| y.abs()).fold(0.0, f64::max);

    // Residual after removing the best polynomial of degree k-1.
    let c = all_x[all_x.len() / 2];
    let poly_cols: Vec<Vec<f64>> = (0..k).map(|j| all_x.iter().map(|&x| (x / c).powi(j as i32)).collect()).collect();
    let poly = weighted_lstsq(&poly_cols, &all_y, None)?;
    if poly.max_residual <= 1e-9 * (1.0 + scale) {
        return Ok(AlphaEstimate {
            verdict: AlphaVerdict::Dominated,
            alpha: f64::NAN,
            band: f64::NAN,
            sub_exponents: Vec::new(),
            envelope_slope: f64::NAN,
            alpha_floor: None,
        });
    }
    let env: Vec<f64> = (0..3)
        .map(|s| poly.residuals[s * per..(s + 1) * per].iter().map(|r| r.abs()).fold(0.0, f64::max))
        .collect();
    let envelope_slope = (env[2] / env[0]).ln() / (span * 2.0 / 3.0);

    let sub_fits: Vec<Option<(f64, f64)>> = subs.iter().map(|(xs, ys)| best_exponent(xs, ys, k)).collect();
    let full = best_exponent(&all_x, &all_y, k);
    let sub_exponents: Vec<f64> = sub_fits.iter().map(|f| f.map_or(f64::NAN, |v| v.0)).collect();
    let drift = sub_exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - sub_exponents.iter().copied().fold(f64::INFINITY, f64::min);
    let clean = full.is_some_and(|(_, r)| r < 1e-3) && drift.is_finite() && drift <= 0.1;
    let (verdict, alpha, alpha_floor) = if clean {
        let e = full.map(|v| v.0).unwrap_or(f64::NAN);
        (AlphaVerdict::Power, e - k as f64, None)
    } else if envelope_slope < 0.1 {
        let floor = envelope_slope.max(0.0) - k as f64;
        (AlphaVerdict::Dominated, f64::NAN, Some(floor))
    } else {
        (AlphaVerdict::NoPowerBehavior, f64::NAN, None)
    };
    Ok(AlphaEstimate {
        verdict,
        alpha,
        band: if drift.is_finite() { 0.5 * drift + 0.005 } else { f64::NAN },
        sub_exponents,
        envelope_slope,
        alpha_floor,
    })
}

/// Options for the improper integral needed when `α + k < -1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftOptions {
    /// Start of the power-law tail model for `f - p/Γ(α+k+1)`.
    pub tail_start: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions { tail_start: 10.0 }
    }
}

/// The same `(α, γ)` at level `k + m`.
///
/// Each step replaces `p` by `(α+k+1)∫p`, plus `Γ(α+k+2)·∫_0^∞(f - p/Γ(α+k+1))`
/// when `α + k < -1`. `w` supplies `f` for that integral.
pub fn lift_claim(w: &Operator, claim: &CesaroClaim, m: u32) -> Result<CesaroClaim, CesaroError> {
    lift_claim_with(w, claim, m, &LiftOptions::default())
}

pub fn lift_claim_with(w: &Operator, claim: &CesaroClaim, m: u32, opts: &LiftOptions) -> Result<CesaroClaim, CesaroError> {
    if claim.k != w.k {
        return Err(CesaroError::LevelMismatch { claim: claim.k, operator: w.k });
    }
    lift_steps(Some(w), claim, m, opts)
}

fn lift_steps(w: Option<&Operator>, claim: &CesaroClaim, m: u32, opts: &LiftOptions) -> Result<CesaroClaim, CesaroError> {
    let mut c = claim.clone();
    let mut op = w.cloned();
    for _ in 0..m {
        let e = c.exponent();
        let mut q: Vec<f64> = poly_primitive(&c.p).iter().map(|v| v * (e + 1.0)).collect();
        if e < -1.0 {
            let Some(src) = op.as_ref() else {
                return Err(CesaroError::Precondition(format!(
                    "lifting with α+k = {e} < -1 needs the numerator at the claim's level"
                )));
            };
            let g = c.normalization()?;
            let num = src.num.clone();
            let p = c.p.clone();
            let integrand = move |t: f64| -> Result<f64, EvalError> { Ok(num.eval(t)? - poly_eval(&p, t) / g) };
            let tail = TailModel::Power { p: -e, c: None, t0: opts.tail_start };
            let r = quad_semi_infinite(integrand, 0.0, tail, src.num.breaks(), src.num.cfg())?;
            let konst = gamma(e + 2.0)? * r.value;
            if q.is_empty() {
                q.push(0.0);
            }
            q[0] += konst;
        }
        op = op.map(|o| o.lift(1)).transpose()?;
        c = CesaroClaim::new(c.alpha, c.gamma, c.k + 1, q)?;
    }
    Ok(c)
}

/// Lift whichever side is lower so claim and operator share a level.
///
/// Lifting the claim past the operator's level only works when no step
/// needs the improper integral (`α + k > -1` throughout).
pub fn align(w: &Operator, claim: &CesaroClaim) -> Result<(Operator, CesaroClaim), CesaroError> {
    if w.k > claim.k {
        let c = lift_steps(None, claim, w.k - claim.k, &LiftOptions::default())?;
        Ok((w.clone(), c))
    } else {
        Ok((w.lift(claim.k - w.k)?, claim.clone()))
    }
}

/// `DW ~ (α-1, γ)` at level `k+1` with the same `p`.
pub fn derivative_claim(claim: &CesaroClaim) -> Result<CesaroClaim, CesaroError> {
    let a = claim.alpha - 1.0;
    if is_excluded(a) {
        return Err(CesaroError::Excluded(a));
    }
    CesaroClaim::new(a, claim.gamma, claim.k + 1, claim.p.clone())
}

/// `xW ~ (α+1, (α+1)γ)`, at the level `mul_by_x` produces.
pub fn xmul_claim(w: &Operator, claim: &CesaroClaim) -> Result<CesaroClaim, CesaroError> {
    let a = claim.alpha + 1.0;
    if is_excluded(a) {
        return Err(CesaroError::Excluded(a));
    }
    let c = if claim.k == 1 { lift_claim(w, claim, 1)? } else { claim.clone() };
    let n = c.k as f64;
    let e = c.alpha + n;
    // (α+n+1)(x p - n ∫p), plus the constant from the lift in the
    // integrable case; the x^n terms cancel.
    let w_n = w.lift(c.k - w.k)?;
    let q1 = lift_claim(&w_n, &c, 1)?.p;
    let xp: Vec<f64> = std::iter::once(0.0).chain(c.p.iter().copied()).collect();
    let mut q = poly_combine(e + 1.0, &xp, -n, &q1);
    if q.len() > c.k as usize {
        q.truncate(c.k as usize);
    }
    CesaroClaim::new(a, (claim.alpha + 1.0) * claim.gamma, c.k, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HconvReport {
    pub verdict: Verdict,
    pub premise: VerifyReport,
    pub conclusion_claim: Option<CesaroClaim>,
    pub conclusion: Option<VerifyReport>,
}

/// From `H∗W ~ (α, γ)` conclude `xW ~ (α, αγ)` and check it.
pub fn hconv_theorem_check(
    w: &Operator,
    claim_on_hw: &CesaroClaim,
    window: (f64, f64),
    tol: f64,
) -> Result<HconvReport, CesaroError> {
    let h = Operator::embed(&CPlusFunction::heaviside(*w.num.cfg()))?;
    let v = h.mul(w)?;
    let (v, claim) = align(&v, claim_on_hw)?;
    let premise = verify_claim(&v, &claim, window, tol)?;
    if !premise.pass {
        return Ok(HconvReport { verdict: Verdict::PreconditionFailed, premise, conclusion_claim: None, conclusion: None });
    }
    let n = claim.k as f64;
    let q1 = lift_claim(&v, &claim, 1)?.p;
    let xp: Vec<f64> = std::iter::once(0.0).chain(claim.p.iter().copied()).collect();
    let q = poly_combine(claim.alpha + n + 1.0, &xp, -(n + 1.0), &q1);
    let concluded = CesaroClaim::new(claim.alpha, claim.alpha * claim.gamma, claim.k + 1, q)?;
    let xw = w.mul_by_x()?;
    let (xw, concluded) = align(&xw, &concluded)?;
    let conclusion = verify_claim(&xw, &concluded, window, tol)?;
    Ok(HconvReport {
        verdict: conclusion.verdict,
        premise,
        conclusion_claim: Some(concluded),
        conclusion: Some(conclusion),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveReport {
    pub verdict: Verdict,
    pub pass: bool,
    /// `W = Dⁿ W_g` on `(b, X_max)`.
    pub equal_on: IntervalReport,
    /// `Γ(α+n+1) g(x) / x^{α+n} → γ`.
    pub limit: VerifyReport,
}

/// Alternative characterization: `W = Dⁿ g` on `(b, ∞)` with
/// `g(x)/x^{α+n} → γ/Γ(α+n+1)`. Uses `g = H^{n-k}∗f`, so `n >= k`.
pub fn verify_via_primitive(
    w: &Operator,
    alpha: f64,
    gamma_: f64,
    n: u32,
    b: f64,
    window: (f64, f64),
    tol: f64,
) -> Result<PrimitiveReport, CesaroError> {
    if !(alpha + n as f64 > 0.0) {
        return Err(CesaroError::Precondition(format!("α + n = {} must be positive", alpha + n as f64)));
    }
    if n < w.k {
        return Err(CesaroError::Precondition(format!("n = {n} must be at least k = {}", w.k)));
    }
    let g = if n == w.k { w.num.clone() } else { w.num.heaviside_convolve((n - w.k) as usize)? };
    let rebuilt = Operator::embed(&g)?.derivative_n(n);
    let opts = ProbeOptions { x_max: (2.0 * b).max(50.0), ..ProbeOptions::default() };
    let equal_on = vanishes_on_with(&w.sub(&rebuilt)?, b, f64::INFINITY, 1e-8, &opts)?;
    let e = alpha + n as f64;
    let norm = gamma(e + 1.0)?;
    let xs = geometric_abscissae(window)?;
    let rows = sample(&xs, |x| {
        let v = g.eval_est(x)?;
        let s = x.powf(e);
        Ok((norm * v.value / s, (norm.abs() * v.err + 4.0 * f64::EPSILON * (norm * v.value).abs()) / s))
    })?;
    let (ratios, errors) = rows.into_iter().unzip();
    let limit = judge(xs, ratios, errors, gamma_, tol);
    let verdict = match (equal_on.verdict, limit.verdict) {
        (true, Verdict::Pass) => Verdict::Pass,
        (_, Verdict::Inconclusive) => Verdict::Inconclusive,
        _ => Verdict::Fail,
    };
    Ok(PrimitiveReport { verdict, pass: verdict == Verdict::Pass, equal_on, limit })
}

/// Ordinary asymptotics `f(x) ~ γ x^α/Γ(α+1)` give `W_f ~ (α, γ)` at `k = 1`.
///
/// The ordinary limit is checked on the window first. For `α < -1` the
/// claim carries `p = Γ(α+2) ∫_0^∞ f`.
pub fn embed_claim(f: &CPlusFunction, alpha: f64, gamma_: f64, window: (f64, f64), tol: f64) -> Result<(CesaroClaim, VerifyReport), CesaroError> {
    if is_excluded(alpha) || !alpha.is_finite() {
        return Err(CesaroError::Excluded(alpha));
    }
    let norm = gamma(alpha + 1.0)?;
    let xs = geometric_abscissae(window)?;
    let rows = sample(&xs, |x| {
        let v = f.eval_est(x)?;
        let s = x.powf(alpha);
        Ok((norm * v.value / s, (norm.abs() * v.err + 4.0 * f64::EPSILON * (norm * v.value).abs()) / s))
    })?;
    let (ratios, errors) = rows.into_iter().unzip();
    let ordinary = judge(xs, ratios, errors, gamma_, tol);
    if !ordinary.pass {
        return Err(CesaroError::Precondition(format!(
            "ordinary limit Γ(α+1) f(x)/x^α → {gamma_} not confirmed on the window (tail estimate {})",
            ordinary.tail_estimate
        )));
    }
    let p = if alpha < -1.0 {
        let tail = TailModel::Power { p: -alpha, c: None, t0: window.0 };
        let r = quad_semi_infinite(|t| f.eval(t), 0.0, tail, f.breaks(), f.cfg())?;
        vec![gamma(alpha + 2.0)? * r.value]
    } else {
        Vec::new()
    };
    Ok((CesaroClaim::new(alpha, gamma_, 1, p)?, ordinary))
}
