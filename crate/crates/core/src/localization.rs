//! Vanishing on intervals, equality on intervals and support estimation.
//!
//! `W = f/H^k` vanishes on `(a, b)` when `f` agrees there with a polynomial
//! of degree at most `k - 1`. The test fits that polynomial by least squares
//! on Chebyshev nodes of the (clipped) interval and compares the residual
//! with the data scale.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::{AlgebraError, CPlusFunction, Operator};
use crate::error::{EvalError, FitError};
use crate::numerics::{chebyshev_nodes, lsq_polyfit};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocalizationError {
    #[error("degenerate interval ({a}, {b}) after clipping to the probe window")]
    DegenerateInterval { a: f64, b: f64 },
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Algebra(#[from] AlgebraError),
    #[error("invalid resolution {0}")]
    Resolution(f64),
}

impl From<EvalError> for LocalizationError {
    fn from(e: EvalError) -> Self {
        LocalizationError::Algebra(e.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    /// Infinite or long intervals are clipped to `[-x_max, x_max]`.
    pub x_max: f64,
    pub nodes: usize,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        ProbeOptions { x_max: 50.0, nodes: 48 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    /// The interval actually probed.
    pub interval: (f64, f64),
    pub verdict: bool,
    /// Monomial coefficients of the fitted polynomial, constant first.
    pub fit_coeffs: Vec<f64>,
    pub degree: usize,
    pub residual_rms: f64,
    pub max_residual: f64,
    pub witness: f64,
    /// Largest sampled `|f|`.
    pub scale: f64,
    /// Largest propagated evaluation error among the samples.
    pub err_est: f64,
    pub tol: f64,
}

impl IntervalReport {
    /// True when evaluation error, not the residual, decides the verdict.
    pub fn unresolved(&self) -> bool {
        self.err_est > self.tol * (1.0 + self.scale)
    }
}

/// Polynomial fit of degree `degree` to `f` on the clipped interval.
fn fit_numerator(
    f: &CPlusFunction,
    a: f64,
    b: f64,
    degree: usize,
    tol: f64,
    opts: &ProbeOptions,
) -> Result<IntervalReport, LocalizationError> {
    let lo = a.max(-opts.x_max);
    let hi = b.min(opts.x_max);
    if !(hi - lo > 10.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(1.0)) {
        return Err(LocalizationError::DegenerateInterval { a: lo, b: hi });
    }
    let n = opts.nodes.max(2 * degree + 8);
    let xs = chebyshev_nodes(lo, hi, n);
    let mut pts = Vec::with_capacity(n);
    let mut err_est: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &x in &xs {
        let e = f.eval_est(x)?;
        pts.push((x, e.value));
        err_est = err_est.max(e.err);
        scale = scale.max(e.value.abs());
    }
    let fit = lsq_polyfit(&pts, degree, None)?;
    Ok(IntervalReport {
        interval: (lo, hi),
        verdict: fit.residual_rms <= tol * (1.0 + scale) + err_est,
        fit_coeffs: fit.coeffs,
        degree,
        residual_rms: fit.residual_rms,
        max_residual: fit.max_residual,
        witness: fit.witness,
        scale,
        err_est,
        tol,
    })
}

/// Does `W` vanish on `(a, b)`?
pub fn vanishes_on(w: &Operator, a: f64, b: f64, tol: f64) -> Result<IntervalReport, LocalizationError> {
    vanishes_on_with(w, a, b, tol, &ProbeOptions::default())
}

pub fn vanishes_on_with(
    w: &Operator,
    a: f64,
    b: f64,
    tol: f64,
    opts: &ProbeOptions,
) -> Result<IntervalReport, LocalizationError> {
    if !(a < b) {
        return Err(LocalizationError::DegenerateInterval { a, b });
    }
    fit_numerator(&w.num, a, b, w.k as usize - 1, tol, opts)
}

/// `W = V` on `(a, b)`, i.e. `W - V` vanishes there.
pub fn equal_on(w: &Operator, v: &Operator, a: f64, b: f64, tol: f64) -> Result<IntervalReport, LocalizationError> {
    vanishes_on(&w.sub(v)?, a, b, tol)
}

pub const DEFAULT_SUPPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportReport {
    pub window: (f64, f64),
    pub resolution: f64,
    /// Closed intervals covering the support within the window.
    pub intervals: Vec<(f64, f64)>,
    /// Cells whose verdict was decided by evaluation error.
    pub unresolved: Vec<(f64, f64)>,
}

/// Outer approximation of `supp W ∩ window` at the given resolution.
///
/// Numerators built from quadrature carry errors near `1e-7` relative when a
/// kink sits close to a panel edge, so `tol` around `1e-6` is the practical
/// floor for such operators. [`DEFAULT_SUPPORT_TOL`] is that value.
///
/// Cells are bisected until they are no wider than `resolution`; a cell is
/// kept when `W` fails to vanish on it padded by `resolution / 2` on both
/// sides, so isolated points on cell boundaries are not lost.
pub fn support(w: &Operator, window: (f64, f64), resolution: f64, tol: f64) -> Result<SupportReport, LocalizationError> {
    let (lo, hi) = window;
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(LocalizationError::Resolution(resolution));
    }
    if !(lo < hi) {
        return Err(LocalizationError::DegenerateInterval { a: lo, b: hi });
    }
    let opts = ProbeOptions { x_max: lo.abs().max(hi.abs()) + resolution, ..ProbeOptions::default() };
    let mut marked = Vec::new();
    let mut unresolved = Vec::new();
    scan(w, lo, hi, resolution, tol, &opts, &mut marked, &mut unresolved)?;
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for (a, b) in marked {
        match intervals.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => intervals.push((a, b)),
        }
    }
    Ok(SupportReport { window, resolution, intervals, unresolved })
}

#[allow(clippy::too_many_arguments)]
fn scan(
    w: &Operator,
    a: f64,
    b: f64,
    resolution: f64,
    tol: f64,
    opts: &ProbeOptions,
    marked: &mut Vec<(f64, f64)>,
    unresolved: &mut Vec<(f64, f64)>,
) -> Result<(), LocalizationError> {
    let pad = 0.5 * resolution;
    let report = vanishes_on_with(w, a - pad, b + pad, tol, opts)?;
    if report.verdict {
        return Ok(());
    }
    if b - a <= resolution {
        if report.unresolved() {
            unresolved.push((a, b));
        }
        marked.push((a, b));
        return Ok(());
    }
    let (mut ml, mut ul) = (Vec::new(), Vec::new());
    let (mut mr, mut ur) = (Vec::new(), Vec::new());
    let m = 0.5 * (a + b);
    let (left, right) = rayon::join(
        || scan(w, a, m, resolution, tol, opts, &mut ml, &mut ul),
        || scan(w, m, b, resolution, tol, opts, &mut mr, &mut ur),
    );
    left?;
    right?;
    marked.extend(ml);
    marked.extend(mr);
    unresolved.extend(ul);
    unresolved.extend(ur);
    Ok(())
}

/// Coefficients of `W = Σ_{n=0}^{k-2} α_n δ^{(n)}` for an operator vanishing
/// on `(0, ∞)`: with `f = Σ a_j x^j` there, `α_n = (k-1-n)!·a_{k-1-n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaDecomposition {
    pub alphas: Vec<f64>,
    pub report: IntervalReport,
}

pub fn delta_decomposition(w: &Operator, tol: f64) -> Result<DeltaDecomposition, LocalizationError> {
    let opts = ProbeOptions::default();
    let report = vanishes_on_with(w, 0.0, opts.x_max, tol, &opts)?;
    let k = w.k as usize;
    let mut alphas = Vec::with_capacity(k.saturating_sub(1));
    let mut fact = 1.0;
    for n in (0..k.saturating_sub(1)).rev() {
        // n runs k-2 .. 0 so that (k-1-n)! grows with the loop.
        let j = k - 1 - n;
        fact *= j as f64;
        alphas.push(fact * report.fit_coeffs.get(j).copied().unwrap_or(0.0));
    }
    alphas.reverse();
    Ok(DeltaDecomposition { alphas, report })
}

/// The multiple `α` in `W = αδ` when `xW = 0`: `α = (k-1)!·β` for
/// `f = β x^{k-1}` on `(0, ∞)`.
pub fn delta_multiple(w: &Operator, tol: f64) -> Result<(f64, DeltaDecomposition), LocalizationError> {
    let d = delta_decomposition(w, tol)?;
    let alpha = d.alphas.first().copied().unwrap_or(0.0);
    Ok((alpha, d))
}

/// If `DW` vanishes on `(a, b)`, `W` equals `c·W_H` there with
/// `c = k!·a_k` from the degree-`k` fit. Returns `None` when `DW` does not
/// vanish.
pub fn constant_on(w: &Operator, a: f64, b: f64, tol: f64) -> Result<Option<(f64, IntervalReport)>, LocalizationError> {
    let report = vanishes_on(&w.derivative(), a, b, tol)?;
    if !report.verdict {
        return Ok(None);
    }
    let k = w.k as usize;
    let fact: f64 = (1..=k).map(|i| i as f64).product();
    let c = fact * report.fit_coeffs.get(k).copied().unwrap_or(0.0);
    Ok(Some((c, report)))
}

/// Reports for `xW` on `(a, b)` and for `W` on `(a, 0)` and `(0, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub xw: IntervalReport,
    pub left: IntervalReport,
    pub right: IntervalReport,
    pub whole: IntervalReport,
}

pub fn xmul_split(w: &Operator, a: f64, b: f64, tol: f64) -> Result<SplitReport, LocalizationError> {
    Ok(SplitReport {
        xw: vanishes_on(&w.mul_by_x()?, a, b, tol)?,
        left: vanishes_on(w, a, 0.0, tol)?,
        right: vanishes_on(w, 0.0, b, tol)?,
        whole: vanishes_on(w, a, b, tol)?,
    })
}
