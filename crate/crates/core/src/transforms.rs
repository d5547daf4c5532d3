//! Stieltjes and Laplace transforms on `M` and the Abelian / Tauberian
//! harnesses that check them along sector rays.
//!
//! Semi-infinite integrals are truncated where the numerator's growth
//! certificate says the tail is below `tail_tol`. Complex powers use the
//! principal branch, so `z` must avoid the cut `(-∞, 0]`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, CPlusFunction, GrowthCertificate, GrowthKind, Operator};
use crate::cesaro::{align, lift_claim, verify_claim, CesaroClaim, CesaroError, Verdict, VerifyReport};
use crate::error::{EvalError, QuadError, SpecialError};
use crate::numerics::{lsq_polyfit, quad_semi_infinite, QuadConfig, TailModel};
use crate::special::{digamma_series, gamma, ln_gamma, pochhammer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("z = {0} lies on the branch cut (-inf, 0]")]
    BranchCut(Complex64),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("missing growth certificate for {0}; attach one with --growth")]
    MissingCertificate(String),
    #[error(transparent)]
    Quad(#[from] QuadError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Cesaro(#[from] CesaroError),
}

impl From<EvalError> for TransformError {
    fn from(e: EvalError) -> Self {
        TransformError::Quad(e.into())
    }
}

/// Serializable complex number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexValue {
    fn from(z: Complex64) -> Self {
        ComplexValue { re: z.re, im: z.im }
    }
}

impl From<ComplexValue> for Complex64 {
    fn from(z: ComplexValue) -> Self {
        Complex64::new(z.re, z.im)
    }
}

impl std::fmt::Display for ComplexValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.im < 0.0 || (self.im == 0.0 && self.im.is_sign_negative()) {
            write!(f, "{:e}-{:e}i", self.re, -self.im)
        } else {
            write!(f, "{:e}+{:e}i", self.re, self.im)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformValue {
    pub value: ComplexValue,
    /// Quadrature error plus tail bound, scaled like the value.
    pub err: f64,
    pub truncation: f64,
    pub tail_bound: f64,
    pub panels: usize,
}

impl TransformValue {
    pub fn complex(&self) -> Complex64 {
        self.value.into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayDirection {
    ToInfinity,
    ToZero,
}

/// `arg z = θ` with moduli `r0·ratio^{±n}`, `n = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorRay {
    pub theta: f64,
    pub r0: f64,
    pub ratio: f64,
    pub steps: usize,
    pub direction: RayDirection,
}

/// Rays must stay inside `|arg z| <= THETA_MAX`.
pub const THETA_MAX: f64 = 0.49 * PI;
pub const MIN_SCHEDULE: usize = 8;

impl SectorRay {
    pub fn new(theta: f64, r0: f64, ratio: f64, steps: usize, direction: RayDirection) -> Result<Self, TransformError> {
        let ray = SectorRay { theta, r0, ratio, steps, direction };
        ray.validate()?;
        Ok(ray)
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(self.theta.abs() <= THETA_MAX) {
            return Err(TransformError::Precondition(format!(
                "|theta| = {} exceeds {THETA_MAX}",
                self.theta.abs()
            )));
        }
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(TransformError::Precondition(format!("r0 = {} must be positive", self.r0)));
        }
        if !(self.ratio >= 1.5 && self.ratio.is_finite()) {
            return Err(TransformError::Precondition(format!("ratio = {} must be at least 1.5", self.ratio)));
        }
        if self.steps + 1 < MIN_SCHEDULE {
            return Err(TransformError::Precondition(format!(
                "schedule has {} points, need at least {MIN_SCHEDULE}",
                self.steps + 1
            )));
        }
        Ok(())
    }

    pub fn moduli(&self) -> Vec<f64> {
        (0..=self.steps)
            .map(|n| match self.direction {
                RayDirection::ToInfinity => self.r0 * self.ratio.powi(n as i32),
                RayDirection::ToZero => self.r0 / self.ratio.powi(n as i32),
            })
            .collect()
    }

    pub fn points(&self) -> Vec<Complex64> {
        self.moduli().into_iter().map(|m| Complex64::from_polar(m, self.theta)).collect()
    }
}

fn check_cut(z: Complex64) -> Result<(), TransformError> {
    if !(z.re.is_finite() && z.im.is_finite()) || (z.im == 0.0 && z.re <= 0.0) {
        return Err(TransformError::BranchCut(z));
    }
    Ok(())
}

fn certificate(f: &CPlusFunction) -> Result<GrowthCertificate, TransformError> {
    f.growth().ok_or_else(|| TransformError::MissingCertificate(f.to_string()))
}

fn closed_form(value: Complex64, terms: usize) -> TransformValue {
    TransformValue {
        value: value.into(),
        err: 8.0 * f64::EPSILON * terms.max(1) as f64 * value.norm(),
        truncation: f64::INFINITY,
        tail_bound: 0.0,
        panels: 0,
    }
}

/// `S_ρ f(z) = ∫_0^∞ f(x) (x+z)^{-ρ-1} dx`. Power sums use the Beta
/// integral; other numerators go through [`classical_stieltjes_quad`].
pub fn classical_stieltjes(f: &CPlusFunction, rho: f64, z: Complex64, cfg: &QuadConfig) -> Result<TransformValue, TransformError> {
    check_cut(z)?;
    if let Some(ps) = f.as_power_sum() {
        if ps.terms().iter().all(|&(nu, _)| nu > -1.0) {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(nu, c) in ps.terms() {
                if !(rho > nu) {
                    return Err(QuadError::DivergentTail(format!("x^{nu} has no Stieltjes transform of index {rho}")).into());
                }
                acc += z.powf(nu - rho) * (c * gamma(nu + 1.0)? * gamma(rho - nu)? / gamma(rho + 1.0)?);
            }
            return Ok(closed_form(acc, ps.terms().len()));
        }
    }
    classical_stieltjes_quad(f, rho, z, cfg)
}

/// Quadrature form of [`classical_stieltjes`], truncated by the growth
/// certificate.
pub fn classical_stieltjes_quad(f: &CPlusFunction, rho: f64, z: Complex64, cfg: &QuadConfig) -> Result<TransformValue, TransformError> {
    check_cut(z)?;
    let cert = certificate(f)?;
    let p = match cert.kind {
        GrowthKind::Power { p } => p,
        GrowthKind::Exponential { sigma } if sigma <= 0.0 => 0.0,
        GrowthKind::Exponential { sigma } => {
            return Err(QuadError::DivergentTail(format!(
                "exponential growth e^({sigma}x) has no Stieltjes transform"
            ))
            .into())
        }
    };
    let q = rho + 1.0 - p;
    if !(q > 1.0) {
        return Err(QuadError::DivergentTail(format!(
            "|f| <= C x^{p} leaves an integrand decaying like x^-{q}; need rho > {p}"
        ))
        .into());
    }
    // |x + z| >= x when Re z >= 0, and >= x/2 once x >= 2|z| otherwise.
    let (c, t0) = if z.re >= 0.0 {
        (cert.c, cert.t0)
    } else {
        (cert.c * 2f64.powf(rho + 1.0), cert.t0.max(2.0 * z.norm()))
    };
    let tail = TailModel::Power { p: q, c: Some(c), t0 };
    let integrand = |x: f64| -> Result<Complex64, EvalError> {
        let v = f.eval(x)?;
        Ok((Complex64::new(x, 0.0) + z).powf(-(rho + 1.0)) * v)
    };
    let r = quad_semi_infinite(integrand, 0.0, tail, f.breaks(), cfg)?;
    Ok(TransformValue { value: r.value.into(), err: r.err, truncation: r.truncation, tail_bound: r.tail_bound, panels: r.panels })
}

/// `Λ_r W(z) = (r+1)_k S_{r+k} f(z)`.
pub fn stieltjes(w: &Operator, r: f64, z: Complex64, cfg: &QuadConfig) -> Result<TransformValue, TransformError> {
    if !(r > -1.0) {
        return Err(TransformError::Precondition(format!("index r = {r} must exceed -1")));
    }
    let mut t = classical_stieltjes(&w.num, r + w.k as f64, z, cfg)?;
    let poch = pochhammer(r, w.k);
    t.value = (t.complex() * poch).into();
    t.err *= poch.abs();
    t.tail_bound *= poch.abs();
    Ok(t)
}

/// `L W(z) = z^k ∫_0^∞ e^{-zx} f(x) dx`. Power sums use `Γ(ν+1) z^{-ν-1}`.
pub fn laplace(w: &Operator, z: Complex64, cfg: &QuadConfig) -> Result<TransformValue, TransformError> {
    if let Some(ps) = w.num.as_power_sum() {
        if ps.terms().iter().all(|&(nu, _)| nu > -1.0) {
            if !(z.re > 0.0) {
                return Err(TransformError::Precondition(format!("Re z = {} must be positive", z.re)));
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for &(nu, c) in ps.terms() {
                acc += z.powf(w.k as f64 - nu - 1.0) * (c * gamma(nu + 1.0)?);
            }
            return Ok(closed_form(acc, ps.terms().len()));
        }
    }
    laplace_quad(w, z, cfg)
}

/// Quadrature form of [`laplace`], truncated by the growth certificate.
pub fn laplace_quad(w: &Operator, z: Complex64, cfg: &QuadConfig) -> Result<TransformValue, TransformError> {
    let f = &w.num;
    let cert = certificate(f)?;
    let (s, c) = match cert.kind {
        GrowthKind::Power { p } => {
            if !(z.re > 0.0) {
                return Err(TransformError::Precondition(format!("Re z = {} must be positive", z.re)));
            }
            // sup_{x >= t0} x^p e^{-s x} with half of Re z kept as margin.
            let s = 0.5 * z.re;
            let at_t0 = cert.t0.powf(p) * (-s * cert.t0).exp();
            let m = if p > 0.0 && p / s > cert.t0 { (p / (std::f64::consts::E * s)).powf(p) } else { at_t0 };
            (s, cert.c * m)
        }
        GrowthKind::Exponential { sigma } => {
            if !(z.re > sigma) {
                return Err(TransformError::Precondition(format!(
                    "Re z = {} must exceed the certified growth rate {sigma}",
                    z.re
                )));
            }
            (z.re - sigma, cert.c)
        }
    };
    let tail = TailModel::Exponential { s, c: Some(c), t0: cert.t0 };
    let integrand = |x: f64| -> Result<Complex64, EvalError> {
        let v = f.eval(x)?;
        Ok((-z * x).exp() * v)
    };
    let r = quad_semi_infinite(integrand, 0.0, tail, f.breaks(), cfg)?;
    let zk = z.powu(w.k);
    Ok(TransformValue {
        value: (r.value * zk).into(),
        err: r.err * zk.norm(),
        truncation: r.truncation,
        tail_bound: r.tail_bound * zk.norm(),
        panels: r.panels,
    })
}

/// Cauchy–Riemann residual `|∂_x Λ + i ∂_y Λ|` by central differences,
/// relative to `max(1, |∂_x Λ|)`.
pub fn holomorphy_residual(w: &Operator, r: f64, z: Complex64, h: f64, cfg: &QuadConfig) -> Result<f64, TransformError> {
    let at = |d: Complex64| stieltjes(w, r, z + d, cfg).map(|t| t.complex());
    let dx = (at(Complex64::new(h, 0.0))? - at(Complex64::new(-h, 0.0))?) / (2.0 * h);
    let dy = (at(Complex64::new(0.0, h))? - at(Complex64::new(0.0, -h))?) / (2.0 * h);
    Ok((dx + Complex64::i() * dy).norm() / dx.norm().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbelianCase {
    /// `α > -1`: no correction needed (constants are still subtracted).
    Regular,
    /// `α < -1`: finite-part form with the correction constants.
    FinitePart,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelianRow {
    pub modulus: f64,
    pub theta: f64,
    pub raw: ComplexValue,
    pub scaled: ComplexValue,
    pub corrected: ComplexValue,
    pub err_est: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbelianReport {
    pub verdict: Verdict,
    pub pass: bool,
    pub case: AbelianCase,
    pub claim: CesaroClaim,
    /// Correction constants: `A_1..A_k` (Stieltjes) or `A_0..A_{k-1}` (Laplace).
    pub constants: Vec<f64>,
    pub rows: Vec<AbelianRow>,
    /// Mean of the corrected values over the last third of the schedule.
    pub limit: ComplexValue,
    pub max_deviation_last: f64,
    pub tol: f64,
    pub claim_check: Option<VerifyReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelianOptions {
    pub tol: f64,
    /// Verify the claim on this window first; `None` skips the check.
    pub claim_window: Option<(f64, f64)>,
    pub claim_tol: f64,
}

impl Default for AbelianOptions {
    fn default() -> Self {
        AbelianOptions { tol: 1e-3, claim_window: Some((10.0, 1e4)), claim_tol: 1e-2 }
    }
}

/// Same-level representative with `α + k > -1`, as both theorems require.
fn admissible_representative(w: &Operator, claim: &CesaroClaim) -> Result<(Operator, CesaroClaim), TransformError> {
    let (mut op, mut c) = align(w, claim)?;
    while c.exponent() <= -1.0 {
        c = lift_claim(&op, &c, 1)?;
        op = op.lift(1)?;
    }
    Ok((op, c))
}

fn claim_precheck(w: &Operator, claim: &CesaroClaim, opts: &AbelianOptions) -> Result<Option<VerifyReport>, TransformError> {
    match opts.claim_window {
        None => Ok(None),
        Some(win) => Ok(Some(verify_claim(w, claim, win, opts.claim_tol)?)),
    }
}

/// Tightens `cfg` so the absolute error of a raw value stays below
/// `tol / 100` once multiplied by `|scale|`.
fn row_config(cfg: &QuadConfig, claim: &CesaroClaim, opts: &AbelianOptions, scale: f64) -> QuadConfig {
    let budget = opts.tol * claim.gamma.abs().max(1.0) / (100.0 * scale.max(f64::MIN_POSITIVE));
    QuadConfig {
        abs_tol: cfg.abs_tol.min(budget).max(f64::MIN_POSITIVE),
        tail_tol: cfg.tail_tol.min(budget).max(f64::MIN_POSITIVE),
        ..*cfg
    }
}

fn judge_rows(
    rows: Vec<AbelianRow>,
    claim: CesaroClaim,
    constants: Vec<f64>,
    case: AbelianCase,
    opts: &AbelianOptions,
    claim_check: Option<VerifyReport>,
) -> AbelianReport {
    let n = rows.len();
    let third = (n / 3).max(1);
    let target = Complex64::new(claim.gamma, 0.0);
    let last = &rows[n - third..];
    let limit = last.iter().map(|r| Complex64::from(r.corrected)).sum::<Complex64>() / last.len() as f64;
    let max_dev = last.iter().map(|r| (Complex64::from(r.corrected) - target).norm()).fold(0.0, f64::max);
    let max_err = last.iter().map(|r| r.err_est).fold(0.0, f64::max);
    let tol = opts.tol * claim.gamma.abs().max(1.0);
    let finite = rows.iter().all(|r| r.corrected.re.is_finite() && r.corrected.im.is_finite());
    let verdict = if claim_check.as_ref().is_some_and(|c| !c.pass) {
        Verdict::PreconditionFailed
    } else if !finite || max_err > tol / 10.0 {
        Verdict::Inconclusive
    } else if max_dev <= tol {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    AbelianReport {
        verdict,
        pass: verdict == Verdict::Pass,
        case,
        claim,
        constants,
        rows,
        limit: limit.into(),
        max_deviation_last: max_dev,
        tol,
        claim_check,
    }
}

/// Stieltjes correction constants `A_j = (k-j)! (r+1)_{j-1} a_{k-j}`,
/// `j = 1..=k`, with `a_i = p_i / Γ(α+k+1)`.
pub fn stieltjes_constants(claim: &CesaroClaim, r: f64) -> Result<Vec<f64>, TransformError> {
    let norm = claim.normalization()?;
    let k = claim.k as usize;
    Ok((1..=k)
        .map(|j| {
            let a = claim.p.get(k - j).copied().unwrap_or(0.0) / norm;
            factorial(k - j) * pochhammer(r, j as u32 - 1) * a
        })
        .collect())
}

/// Laplace correction constants `A_j = (k-j-1)! a_{k-j-1}`, `j = 0..k`.
pub fn laplace_constants(claim: &CesaroClaim) -> Result<Vec<f64>, TransformError> {
    let norm = claim.normalization()?;
    let k = claim.k as usize;
    Ok((0..k)
        .map(|j| factorial(k - j - 1) * claim.p.get(k - j - 1).copied().unwrap_or(0.0) / norm)
        .collect())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// `z^{r-α} Γ(r+1)/Γ(r-α) [Λ_r W(z) - Σ A_j z^{-r-j}] → γ` along the ray.
pub fn abelian_stieltjes_check(
    w: &Operator,
    claim: &CesaroClaim,
    r: f64,
    ray: &SectorRay,
    cfg: &QuadConfig,
    opts: &AbelianOptions,
) -> Result<AbelianReport, TransformError> {
    ray.validate()?;
    if ray.direction != RayDirection::ToInfinity {
        return Err(TransformError::Precondition("Stieltjes limits run to infinity".into()));
    }
    if !(r > claim.alpha) || !(r > -1.0) {
        return Err(TransformError::Precondition(format!("need r > max(α, -1), got r = {r}, α = {}", claim.alpha)));
    }
    let (op, c) = admissible_representative(w, claim)?;
    let claim_check = claim_precheck(&op, &c, opts)?;
    let constants = stieltjes_constants(&c, r)?;
    let factor = gamma(r + 1.0)? / gamma(r - c.alpha)?;
    let rows: Result<Vec<AbelianRow>, TransformError> = ray
        .points()
        .par_iter()
        .map(|&z| {
            let scale = z.powf(r - c.alpha) * factor;
            let t = stieltjes(&op, r, z, &row_config(cfg, &c, opts, scale.norm()))?;
            let raw = t.complex();
            let corr: Complex64 = constants
                .iter()
                .enumerate()
                .map(|(i, &a)| z.powf(-(r + (i + 1) as f64)) * a)
                .sum();
            Ok(AbelianRow {
                modulus: z.norm(),
                theta: z.arg(),
                raw: raw.into(),
                scaled: (raw * scale).into(),
                corrected: ((raw - corr) * scale).into(),
                err_est: t.err * scale.norm(),
            })
        })
        .collect();
    let case = if c.alpha > -1.0 { AbelianCase::Regular } else { AbelianCase::FinitePart };
    Ok(judge_rows(rows?, c, constants, case, opts, claim_check))
}

/// `z^{α+1} [L W(z) - Σ A_j z^j] → γ` as `z → 0` along the ray.
pub fn abelian_laplace_check(
    w: &Operator,
    claim: &CesaroClaim,
    ray: &SectorRay,
    cfg: &QuadConfig,
    opts: &AbelianOptions,
) -> Result<AbelianReport, TransformError> {
    ray.validate()?;
    if ray.direction != RayDirection::ToZero {
        return Err(TransformError::Precondition("Laplace limits run to zero".into()));
    }
    let (op, c) = admissible_representative(w, claim)?;
    let claim_check = claim_precheck(&op, &c, opts)?;
    let constants = laplace_constants(&c)?;
    let rows: Result<Vec<AbelianRow>, TransformError> = ray
        .points()
        .par_iter()
        .map(|&z| {
            let scale = z.powf(c.alpha + 1.0);
            let t = laplace(&op, z, &row_config(cfg, &c, opts, scale.norm()))?;
            let raw = t.complex();
            let corr: Complex64 = constants.iter().enumerate().map(|(j, &a)| z.powu(j as u32) * a).sum();
            Ok(AbelianRow {
                modulus: z.norm(),
                theta: z.arg(),
                raw: raw.into(),
                scaled: (raw * scale).into(),
                corrected: ((raw - corr) * scale).into(),
                err_est: t.err * scale.norm(),
            })
        })
        .collect();
    let case = if c.alpha > -1.0 { AbelianCase::Regular } else { AbelianCase::FinitePart };
    Ok(judge_rows(rows?, c, constants, case, opts, claim_check))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauberianReport {
    pub verdict: Verdict,
    pub pass: bool,
    pub nonnegative: bool,
    /// `s^{α+1} L W(s)` along the schedule, in the Abelian row layout.
    pub laplace_side: Vec<AbelianRow>,
    pub gamma_hat: f64,
    pub stabilized: bool,
    pub concluded_claim: Option<CesaroClaim>,
    pub cesaro: Option<VerifyReport>,
    /// `|gamma_hat - tail estimate of the Cesàro ratios|`.
    pub agreement: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauberianOptions {
    /// Last-third spread of `s^{α+1} L W(s)` allowed, relative.
    pub tol: f64,
    pub cesaro_window: (f64, f64),
    pub cesaro_tol: f64,
}

impl Default for TauberianOptions {
    fn default() -> Self {
        TauberianOptions { tol: 1e-3, cesaro_window: (10.0, 1e4), cesaro_tol: 1e-2 }
    }
}

/// For nonnegative `f`, `L W(s) ~ γ s^{-α-1}` as `s ↓ 0` implies
/// `(H∗f)(x) ~ γ x^{α+k+1}/Γ(α+k+2)`. Both sides are measured.
pub fn tauberian_check(
    f: &CPlusFunction,
    k: u32,
    alpha: f64,
    schedule: &SectorRay,
    cfg: &QuadConfig,
    opts: &TauberianOptions,
) -> Result<TauberianReport, TransformError> {
    schedule.validate()?;
    if schedule.direction != RayDirection::ToZero || schedule.theta != 0.0 {
        return Err(TransformError::Precondition("the Laplace side needs real s decreasing to 0".into()));
    }
    if !(alpha > -1.0) {
        return Err(TransformError::Precondition(format!("α = {alpha} must exceed -1")));
    }
    let w = Operator::new(f.clone(), k)?;
    let probe: Vec<f64> = (0..400).map(|i| 1e4 * (i as f64 / 399.0).powi(3)).collect();
    let values: Result<Vec<f64>, EvalError> = probe.par_iter().map(|&x| f.eval(x)).collect();
    let values = values?;
    let nonnegative = values.iter().all(|&v| v >= -1e-12 * (1.0 + v.abs()));
    if !nonnegative {
        return Ok(TauberianReport {
            verdict: Verdict::PreconditionFailed,
            pass: false,
            nonnegative,
            laplace_side: Vec::new(),
            gamma_hat: f64::NAN,
            stabilized: false,
            concluded_claim: None,
            cesaro: None,
            agreement: f64::NAN,
        });
    }
    let side: Result<Vec<AbelianRow>, TransformError> = schedule
        .moduli()
        .par_iter()
        .map(|&s| {
            let t = laplace(&w, Complex64::new(s, 0.0), cfg)?;
            let scale = s.powf(alpha + 1.0);
            let scaled = t.complex() * scale;
            Ok(AbelianRow {
                modulus: s,
                theta: 0.0,
                raw: t.value,
                scaled: scaled.into(),
                corrected: scaled.into(),
                err_est: t.err * scale,
            })
        })
        .collect();
    let side = side?;
    let n = side.len();
    let third = (n / 3).max(1);
    let last: Vec<f64> = side[n - third..].iter().map(|r| r.scaled.re).collect();
    let gamma_hat = side[n - 1].scaled.re;
    let spread = last.iter().copied().fold(f64::NEG_INFINITY, f64::max) - last.iter().copied().fold(f64::INFINITY, f64::min);
    let stabilized = spread <= opts.tol * gamma_hat.abs().max(1.0);
    if !stabilized {
        return Ok(TauberianReport {
            verdict: Verdict::PreconditionFailed,
            pass: false,
            nonnegative,
            laplace_side: side,
            gamma_hat,
            stabilized,
            concluded_claim: None,
            cesaro: None,
            agreement: f64::NAN,
        });
    }
    let concluded = CesaroClaim::new(alpha, gamma_hat, k + 1, Vec::new())?;
    let cesaro = verify_claim(&w.lift(1)?, &concluded, opts.cesaro_window, opts.cesaro_tol)?;
    let agreement = (gamma_hat - cesaro.tail_estimate).abs();
    Ok(TauberianReport {
        verdict: cesaro.verdict,
        pass: cesaro.pass,
        nonnegative,
        laplace_side: side,
        gamma_hat,
        stabilized,
        concluded_claim: Some(concluded),
        cesaro: Some(cesaro),
        agreement,
    })
}

/// The sawtooth `g(x) = ⌊x⌋ - x + 1/2` and its primitive `f = I[g]`.
pub const SAWTOOTH: &str = "floor(x) - x + 1/2";
pub const SAWTOOTH_PRIMITIVE: &str = "I[floor(x) - x + 1/2]";

/// `f/H²` with `f = I[g]`, certified `0 <= f <= 1/8`.
pub fn stirling_operator(cfg: QuadConfig) -> Result<Operator, TransformError> {
    let f = CPlusFunction::parse(SAWTOOTH_PRIMITIVE, cfg)?.with_growth(GrowthCertificate::power(0.0, 0.125, 1.0))?;
    Ok(Operator::new(f, 2)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StirlingPoint {
    pub z: ComplexValue,
    pub modulus: f64,
    pub theta: f64,
    pub lambda: ComplexValue,
    pub err_est: f64,
    pub psi: ComplexValue,
    /// `|Λ₀W - (ln z + 1/(2z) - ψ)|`.
    pub diff_plus: f64,
    /// `|Λ₀W - (ln z - 1/(2z) - ψ)|`.
    pub diff_minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LnGammaRow {
    pub z: f64,
    /// `ln Γ(z) - [z(ln z - 1) + ½ ln z + ½ ln 2π]`.
    pub residual_plus_half_ln: f64,
    /// `ln Γ(z) - [z(ln z - 1) - ½ ln z + ½ ln 2π]`.
    pub residual_minus_half_ln: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StirlingReport {
    pub points: Vec<StirlingPoint>,
    pub adjudication_tol: f64,
    /// `"minus"` (`ln z - 1/(2z) - ψ`), `"plus"`, or `"undecided"`.
    pub winner: String,
    /// `-d ln|Λ₀W| / d ln|z|` fitted on the real points.
    pub decay_exponent: f64,
    pub decay_exponent_sector: f64,
    pub max_abs_g: f64,
    pub max_abs_f: f64,
    pub max_abs_f_at_integers: f64,
    pub ln_gamma: Vec<LnGammaRow>,
    /// `"minus_half_ln"` when the classical form tends to 0.
    pub ln_gamma_winner: String,
    /// `ln Γ(z) - (z - ½) ln z + z` at the largest `z`, against `ln √(2π)`.
    pub ln_sqrt_two_pi_estimate: f64,
    pub ln_sqrt_two_pi: f64,
}

pub const STIRLING_MODULI: [f64; 5] = [5.0, 10.0, 50.0, 100.0, 200.0];
pub const STIRLING_THETA: f64 = PI / 6.0;
pub const STIRLING_ADJUDICATION_TOL: f64 = 1e-6;

/// Quadrature settings for [`stirling_demo`]: the `x^{-3}` tail is cut
/// near `2.5e4`, well inside the adjudication tolerance.
pub fn stirling_config() -> QuadConfig {
    QuadConfig { abs_tol: 1e-13, rel_tol: 1e-10, tail_tol: 1e-10, ..QuadConfig::default() }
}

fn decay_slope(points: &[&StirlingPoint]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|p| (p.modulus.ln(), Complex64::from(p.lambda).norm().ln())).collect();
    match lsq_polyfit(&pts, 1, None) {
        Ok(fit) => -fit.coeffs[1],
        Err(_) => f64::NAN,
    }
}

/// `Λ₀` of the sawtooth-primitive operator against both `±1/(2z)` digamma
/// identities, its decay rate and the two `ln Γ` forms.
pub fn stirling_demo(cfg: &QuadConfig) -> Result<StirlingReport, TransformError> {
    let w = stirling_operator(*cfg)?;
    let zs: Vec<Complex64> = [0.0, STIRLING_THETA]
        .iter()
        .flat_map(|&t| STIRLING_MODULI.iter().map(move |&m| Complex64::from_polar(m, t)))
        .collect();
    let points: Result<Vec<StirlingPoint>, TransformError> = zs
        .par_iter()
        .map(|&z| {
            let t = stieltjes(&w, 0.0, z, cfg)?;
            let lambda = t.complex();
            let psi = digamma_series(z)?;
            let half = z.inv() * 0.5;
            Ok(StirlingPoint {
                z: z.into(),
                modulus: z.norm(),
                theta: z.arg(),
                lambda: lambda.into(),
                err_est: t.err,
                psi: psi.into(),
                diff_plus: (lambda - (z.ln() + half - psi)).norm(),
                diff_minus: (lambda - (z.ln() - half - psi)).norm(),
            })
        })
        .collect();
    let points = points?;
    let real: Vec<&StirlingPoint> = points.iter().filter(|p| p.theta == 0.0).collect();
    let sector: Vec<&StirlingPoint> = points.iter().filter(|p| p.theta != 0.0).collect();
    let judged: Vec<&&StirlingPoint> = real.iter().filter(|p| p.modulus <= 50.0).collect();
    let plus_ok = judged.iter().all(|p| p.diff_plus < STIRLING_ADJUDICATION_TOL);
    let minus_ok = judged.iter().all(|p| p.diff_minus < STIRLING_ADJUDICATION_TOL);
    let winner = match (plus_ok, minus_ok) {
        (true, false) => "plus",
        (false, true) => "minus",
        _ => "undecided",
    };

    let g = CPlusFunction::parse(SAWTOOTH, *cfg)?;
    let f = &w.num;
    let mut max_abs_g: f64 = 0.0;
    let mut max_abs_f: f64 = 0.0;
    for i in 0..=2000 {
        let x = i as f64 * 0.0137;
        max_abs_g = max_abs_g.max(g.eval(x)?.abs());
        max_abs_f = max_abs_f.max(f.eval(x)?.abs());
    }
    let mut max_abs_f_at_integers: f64 = 0.0;
    for n in 0..=50 {
        max_abs_f_at_integers = max_abs_f_at_integers.max(f.eval(n as f64)?.abs());
    }

    let half_ln_2pi = 0.5 * (2.0 * PI).ln();
    let mut ln_gamma_rows = Vec::new();
    for &z in &[10.0, 100.0, 1000.0, 10000.0] {
        let lg = ln_gamma(z)?;
        let base = z * (z.ln() - 1.0) + half_ln_2pi;
        ln_gamma_rows.push(LnGammaRow {
            z,
            residual_plus_half_ln: lg - (base + 0.5 * z.ln()),
            residual_minus_half_ln: lg - (base - 0.5 * z.ln()),
        });
    }
    let last = ln_gamma_rows.last().expect("rows");
    let ln_gamma_winner = if last.residual_minus_half_ln.abs() < last.residual_plus_half_ln.abs() {
        "minus_half_ln"
    } else {
        "plus_half_ln"
    };
    let zmax = last.z;
    let ln_sqrt_two_pi_estimate = ln_gamma(zmax)? - (zmax - 0.5) * zmax.ln() + zmax;

    Ok(StirlingReport {
        decay_exponent: decay_slope(&real),
        decay_exponent_sector: decay_slope(&sector),
        points,
        adjudication_tol: STIRLING_ADJUDICATION_TOL,
        winner: winner.into(),
        max_abs_g,
        max_abs_f,
        max_abs_f_at_integers,
        ln_gamma: ln_gamma_rows,
        ln_gamma_winner: ln_gamma_winner.into(),
        ln_sqrt_two_pi_estimate,
        ln_sqrt_two_pi: half_ln_2pi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::PowerSum;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn tight() -> QuadConfig {
        QuadConfig { abs_tol: 1e-14, rel_tol: 1e-10, tail_tol: 1e-13, ..QuadConfig::default() }
    }

    fn power(c: f64, a: f64) -> CPlusFunction {
        CPlusFunction::power_sum(PowerSum::monomial(c, a), cfg())
    }

    fn beta_oracle(nu: f64, rho: f64, z: Complex64) -> Complex64 {
        z.powf(nu - rho) * (gamma(nu + 1.0).unwrap() * gamma(rho - nu).unwrap() / gamma(rho + 1.0).unwrap())
    }

    #[test]
    fn classical_examples() {
        let h = CPlusFunction::heaviside(cfg());
        let v = classical_stieltjes_quad(&h, 1.0, Complex64::new(4.0, 0.0), &tight()).unwrap();
        assert!((v.complex() - 0.25).norm() < 1e-10);
        let f = power(1.0, 0.5);
        for z in [Complex64::new(1.0, 0.0), Complex64::from_polar(4.0, PI / 4.0), Complex64::new(100.0, 0.0)] {
            let got = classical_stieltjes_quad(&f, 2.0, z, &tight()).unwrap().complex();
            let want = beta_oracle(0.5, 2.0, z);
            assert!((got - want).norm() <= 1e-7 * want.norm(), "{z}: {got} vs {want}");
            let exact = classical_stieltjes(&f, 2.0, z, &tight()).unwrap().complex();
            assert!((exact - want).norm() <= 1e-13 * want.norm());
        }
    }

    #[test]
    fn stieltjes_rejections() {
        let f = power(1.0, 2.0);
        assert!(matches!(classical_stieltjes(&f, 1.0, Complex64::new(1.0, 0.0), &cfg()), Err(TransformError::Quad(_))));
        assert!(matches!(classical_stieltjes(&f, 3.0, Complex64::new(-1.0, 0.0), &cfg()), Err(TransformError::BranchCut(_))));
        let s = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        assert!(matches!(classical_stieltjes(&s, 3.0, Complex64::new(1.0, 0.0), &cfg()), Err(TransformError::MissingCertificate(_))));
        assert!(stieltjes(&Operator::delta(cfg()), -1.0, Complex64::new(1.0, 0.0), &cfg()).is_err());
    }

    #[test]
    fn stieltjes_of_delta() {
        for z in [Complex64::new(2.0, 0.0), Complex64::new(3.0, 4.0)] {
            let v = stieltjes(&Operator::delta(cfg()), 0.0, z, &tight()).unwrap().complex();
            assert!((v - z.inv()).norm() < 1e-9);
        }
    }

    #[test]
    fn stieltjes_embedded_heaviside_and_lift() {
        let w = Operator::embed(&CPlusFunction::heaviside(cfg())).unwrap();
        let z = Complex64::new(10.0, 0.0);
        let v = stieltjes(&w, 0.5, z, &tight()).unwrap().complex();
        let want = beta_oracle(1.0, 1.5, z) * 1.5;
        assert!((v - want).norm() < 1e-9 * want.norm());
        let lifted = stieltjes(&w.lift(1).unwrap(), 0.5, z, &tight()).unwrap().complex();
        assert!((lifted - v).norm() < 1e-7 * v.norm());
    }

    #[test]
    fn laplace_examples() {
        for z in [Complex64::new(0.5, 0.0), Complex64::new(2.0, 1.0)] {
            let d = laplace(&Operator::delta(cfg()), z, &cfg()).unwrap().complex();
            assert!((d - 1.0).norm() < 1e-8);
            let w = Operator::embed(&power(1.0, 2.0)).unwrap();
            let v = laplace(&w, z, &cfg()).unwrap().complex();
            let want = z.powi(-3) * 2.0;
            assert!((v - want).norm() < 1e-8 * want.norm());
            let dv = laplace(&w.derivative(), z, &cfg()).unwrap().complex();
            assert!((dv - z * v).norm() < 1e-8 * (z * v).norm());
        }
        assert!(laplace(&Operator::delta(cfg()), Complex64::new(-1.0, 1.0), &cfg()).is_err());
    }

    #[test]
    fn laplace_exponential_certificate() {
        let f = CPlusFunction::parse("exp(x) - 1", cfg())
            .unwrap()
            .with_growth(GrowthCertificate::exponential(1.0, 1.0, 1.0))
            .unwrap();
        let w = Operator::new(f, 1).unwrap();
        let z = Complex64::new(3.0, 0.0);
        // z (1/(z-1) - 1/z) = 1/(z-1)·... for z = 3: 3·(1/2 - 1/3) = 0.5.
        assert!((laplace(&w, z, &cfg()).unwrap().complex() - 0.5).norm() < 1e-8);
        assert!(laplace(&w, Complex64::new(0.5, 0.0), &cfg()).is_err());
    }

    #[test]
    fn holomorphy() {
        let w = Operator::embed(&power(1.0, 0.5)).unwrap();
        let r = holomorphy_residual(&w, 1.0, Complex64::new(2.0, 1.0), 1e-3, &tight()).unwrap();
        assert!(r < 1e-5, "{r}");
    }

    #[test]
    fn sector_ray_validation() {
        assert!(SectorRay::new(PI / 2.0, 1.0, 2.0, 10, RayDirection::ToInfinity).is_err());
        assert!(SectorRay::new(0.0, 1.0, 1.2, 10, RayDirection::ToInfinity).is_err());
        assert!(SectorRay::new(0.0, 1.0, 2.0, 5, RayDirection::ToInfinity).is_err());
        let r = SectorRay::new(0.3, 1.0, 2.0, 7, RayDirection::ToZero).unwrap();
        assert_eq!(r.points().len(), 8);
        assert!((r.moduli()[7] - 1.0 / 128.0).abs() < 1e-15);
    }

    #[test]
    fn abelian_stieltjes_pure_power() {
        // f = x^{1/2}: W_f ~ (0.5, Γ(1.5)); with r = 2 the scaled quantity is exact.
        let w = Operator::embed(&power(1.0, 0.5)).unwrap();
        let g = gamma(1.5).unwrap();
        let c = CesaroClaim::new(0.5, g, 1, vec![]).unwrap();
        for theta in [0.0, PI / 4.0] {
            let ray = SectorRay::new(theta, 10.0, 2.0, 10, RayDirection::ToInfinity).unwrap();
            let rep = abelian_stieltjes_check(&w, &c, 2.0, &ray, &tight(), &AbelianOptions::default()).unwrap();
            assert!(rep.pass, "{rep:?}");
            assert!((Complex64::from(rep.limit) - g).norm() < 1e-2 * g);
        }
    }

    #[test]
    fn stieltjes_constants_match_monomials() {
        // p-part only: W = x/H^3 at r = 0.5. Λ = (1.5)_3 S_{3.5}(x) = A_2 / z^{r+2}.
        let w = Operator::new(power(1.0, 1.0), 3).unwrap();
        let alpha = -3.5;
        let norm = gamma(alpha + 4.0).unwrap();
        let c = CesaroClaim::new(alpha, 0.0, 3, vec![0.0, norm]).unwrap();
        let a = stieltjes_constants(&c, 0.5).unwrap();
        let z = Complex64::new(7.0, 2.0);
        let lam = stieltjes(&w, 0.5, z, &tight()).unwrap().complex();
        assert!((lam - z.powf(-2.5) * a[1]).norm() < 1e-9 * lam.norm());
        assert_eq!((a[0], a[2]), (0.0, 0.0));
    }

    #[test]
    fn laplace_constants_match_monomials() {
        // f = x²/H³: L = z³·2/z³ = 2 = A_0.
        let w = Operator::new(power(1.0, 2.0), 3).unwrap();
        let norm = gamma(-1.5 + 4.0).unwrap();
        let c = CesaroClaim::new(-1.5, 0.0, 3, vec![0.0, 0.0, norm]).unwrap();
        let a = laplace_constants(&c).unwrap();
        assert_eq!(a, vec![2.0, 0.0, 0.0]);
        let l = laplace(&w, Complex64::new(0.3, 0.1), &cfg()).unwrap().complex();
        assert!((l - 2.0).norm() < 1e-8);
    }

    #[test]
    fn abelian_laplace_examples() {
        let w = Operator::embed(&power(1.0, 2.0)).unwrap();
        let c = CesaroClaim::new(2.0, 2.0, 1, vec![]).unwrap();
        let ray = SectorRay::new(0.0, 0.1, 2.0, 10, RayDirection::ToZero).unwrap();
        let opts = AbelianOptions { tol: 1e-8, ..AbelianOptions::default() };
        assert!(abelian_laplace_check(&w, &c, &ray, &cfg(), &opts).unwrap().pass);

        // f = 4 x^{2.5}/Γ(3.5) + 1 + x at k = 2, α = 0.5: A_0 = A_1 = 1.
        let g = gamma(3.5).unwrap();
        let f = CPlusFunction::power_sum(PowerSum::from_terms([(2.5, 4.0 / g), (0.0, 1.0), (1.0, 1.0)]), cfg());
        let w = Operator::new(f, 2).unwrap();
        let c = CesaroClaim::new(0.5, 4.0, 2, vec![g, g]).unwrap();
        for theta in [0.0, PI / 4.0] {
            let ray = SectorRay::new(theta, 0.1, 2.0, 10, RayDirection::ToZero).unwrap();
            let rep = abelian_laplace_check(&w, &c, &ray, &cfg(), &AbelianOptions::default()).unwrap();
            assert_eq!(rep.constants, vec![1.0, 1.0]);
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn abelian_laplace_finite_part() {
        // f = 3x + 2 + x^{-1/2} at k = 2 has α = -2.5 with A_0 = 3, A_1 = 2.
        let f = CPlusFunction::power_sum(PowerSum::from_terms([(1.0, 3.0), (0.0, 2.0), (-0.5, 1.0)]), cfg());
        let w = Operator::new(f, 2).unwrap();
        let norm = gamma(0.5).unwrap();
        let c = CesaroClaim::new(-2.5, norm, 2, vec![2.0 * norm, 3.0 * norm]).unwrap();
        let ray = SectorRay::new(0.0, 1e-2, 2.0, 10, RayDirection::ToZero).unwrap();
        let rep = abelian_laplace_check(&w, &c, &ray, &cfg(), &AbelianOptions::default()).unwrap();
        assert_eq!(rep.case, AbelianCase::FinitePart);
        assert!((rep.constants[0] - 3.0).abs() < 1e-14 && (rep.constants[1] - 2.0).abs() < 1e-14);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn tauberian_monomial() {
        let f = power(1.0, 2.0);
        let s = SectorRay::new(0.0, 0.1, 2.0, 10, RayDirection::ToZero).unwrap();
        let rep = tauberian_check(&f, 1, 1.0, &s, &cfg(), &TauberianOptions::default()).unwrap();
        assert!((rep.gamma_hat - 2.0).abs() < 1e-8);
        assert!(rep.pass, "{rep:?}");
        let neg = CPlusFunction::parse("x^2 - 1", cfg()).unwrap();
        let rep = tauberian_check(&neg, 1, 1.0, &s, &cfg(), &TauberianOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::PreconditionFailed);
    }

    #[test]
    fn stirling_operator_is_certified() {
        let w = stirling_operator(cfg()).unwrap();
        for n in 0..20 {
            assert!(w.eval(n as f64).unwrap().abs() < 1e-12);
        }
        assert!((w.eval(0.5).unwrap() - 0.125).abs() < 1e-12);
    }

    #[test]
    fn tauberian_oscillating_and_decaying() {
        let s = SectorRay::new(0.0, 0.1, 1.5, 7, RayDirection::ToZero).unwrap();
        for (text, c, gamma_want) in [("x^2*(2 + sin(x))", 3.0, 4.0), ("x^2*(1 + exp(-x))", 2.0, 2.0)] {
            let f = CPlusFunction::parse(text, cfg()).unwrap().with_growth(GrowthCertificate::power(2.0, c, 1.0)).unwrap();
            let rep = tauberian_check(&f, 1, 1.0, &s, &cfg(), &TauberianOptions::default()).unwrap();
            assert!((rep.gamma_hat - gamma_want).abs() < 1e-3, "{text}: {}", rep.gamma_hat);
            assert!(rep.pass, "{text}: {rep:?}");
            assert!(rep.agreement < 1e-2 * gamma_want);
        }
    }

    #[test]
    fn stirling_identities() {
        let rep = stirling_demo(&stirling_config()).unwrap();
        assert_eq!(rep.winner, "minus");
        assert!((rep.decay_exponent - 2.0).abs() < 0.1, "{}", rep.decay_exponent);
        assert!((rep.decay_exponent_sector - 2.0).abs() < 0.1);
        assert!((rep.max_abs_g - 0.5).abs() < 1e-2);
        assert!(rep.max_abs_f <= 0.125 + 1e-12);
        assert!(rep.max_abs_f_at_integers < 1e-10);
        assert_eq!(rep.ln_gamma_winner, "minus_half_ln");
        assert!((rep.ln_sqrt_two_pi_estimate - rep.ln_sqrt_two_pi).abs() < 1e-4);
        for p in rep.points.iter().filter(|p| p.modulus <= 50.0) {
            assert!(p.diff_minus < 1e-6, "{p:?}");
        }
    }
}
