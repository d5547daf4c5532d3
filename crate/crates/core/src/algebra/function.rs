//! Numerator functions: continuous, zero on the negative half-line, with
//! optional growth certificates.

use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::AlgebraError;
use crate::error::EvalError;
use crate::expr::{Expr, PowerSum, QuadContext};
use crate::numerics::{quad_with_breaks, Breaks, CumulativeCache, Estimate, QuadConfig, MAX_CUMULATIVE_ORDER};

const LABEL_LIMIT: usize = 160;

/// Kind of a growth bound valid for `x >= t0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GrowthKind {
    /// `|f(x)| <= c·x^p`.
    Power { p: f64 },
    /// `|f(x)| <= c·e^{σx}`.
    Exponential { sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthCertificate {
    #[serde(flatten)]
    pub kind: GrowthKind,
    pub c: f64,
    pub t0: f64,
}

impl GrowthCertificate {
    pub fn power(p: f64, c: f64, t0: f64) -> Self {
        GrowthCertificate { kind: GrowthKind::Power { p }, c, t0 }
    }

    pub fn exponential(sigma: f64, c: f64, t0: f64) -> Self {
        GrowthCertificate { kind: GrowthKind::Exponential { sigma }, c, t0 }
    }

    pub fn bound(&self, x: f64) -> f64 {
        match self.kind {
            GrowthKind::Power { p } => self.c * x.powf(p),
            GrowthKind::Exponential { sigma } => self.c * (sigma * x).exp(),
        }
    }

    fn check_shape(&self) -> Result<(), AlgebraError> {
        let finite = match self.kind {
            GrowthKind::Power { p } => p.is_finite(),
            GrowthKind::Exponential { sigma } => sigma.is_finite(),
        };
        if !finite || !(self.c.is_finite() && self.c >= 0.0) || !(self.t0.is_finite() && self.t0 >= 1.0) {
            return Err(AlgebraError::Certificate(format!(
                "certificate needs finite parameters, C >= 0 and T0 >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    /// Equivalent exponential bound (power bounds are dominated by any `e^{εx}`).
    fn as_exponential(&self, sigma: f64) -> GrowthCertificate {
        match self.kind {
            GrowthKind::Exponential { .. } => *self,
            GrowthKind::Power { p } => {
                // x^p <= (p/(eσ))^p e^{σx} for p > 0.
                let k = if p > 0.0 { (p / (std::f64::consts::E * sigma)).powf(p) } else { 1.0 };
                GrowthCertificate::exponential(sigma, self.c * k, self.t0)
            }
        }
    }
}

pub(crate) enum Body {
    Power(PowerSum),
    Expr { expr: Expr, ctx: QuadContext },
    /// `H^order ∗ inner`.
    Primitive { inner: CPlusFunction, order: usize, cache: Mutex<CumulativeCache> },
    Sum(Vec<(f64, CPlusFunction)>),
    XTimes(CPlusFunction),
    Conv(CPlusFunction, CPlusFunction),
}

pub(crate) struct Node {
    pub(crate) body: Body,
    growth: Option<GrowthCertificate>,
    floor: bool,
    cfg: QuadConfig,
    label: String,
}

/// An element of C₊(ℝ): evaluation is forced to 0 for `x < 0`.
#[derive(Clone)]
pub struct CPlusFunction(pub(crate) Arc<Node>);

impl fmt::Debug for CPlusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CPlusFunction")
            .field("label", &self.0.label)
            .field("growth", &self.0.growth)
            .finish()
    }
}

impl fmt::Display for CPlusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.label)
    }
}

fn clip_label(s: String) -> String {
    if s.chars().count() <= LABEL_LIMIT {
        s
    } else {
        let mut out: String = s.chars().take(LABEL_LIMIT).collect();
        out.push('…');
        out
    }
}

impl CPlusFunction {
    fn from_body(body: Body, growth: Option<GrowthCertificate>, floor: bool, cfg: QuadConfig, label: String) -> Self {
        CPlusFunction(Arc::new(Node { body, growth, floor, cfg, label: clip_label(label) }))
    }

    pub fn power_sum(p: PowerSum, cfg: QuadConfig) -> Self {
        let growth = match p.max_exponent() {
            None => Some(GrowthCertificate::power(0.0, 0.0, 1.0)),
            Some(a) => Some(GrowthCertificate::power(a, p.abs_coeff_sum(), 1.0)),
        };
        let label = p.to_expr().to_string();
        CPlusFunction::from_body(Body::Power(p), growth, false, cfg, label)
    }

    /// The Heaviside function `H` (constant 1 on `x >= 0`).
    pub fn heaviside(cfg: QuadConfig) -> Self {
        CPlusFunction::power_sum(PowerSum::constant(1.0), cfg)
    }

    /// Numerator from a DSL expression; power sums take the exact path.
    pub fn from_expr(expr: Expr, cfg: QuadConfig) -> Self {
        if let Some(p) = expr.as_power_sum() {
            return CPlusFunction::power_sum(p, cfg);
        }
        let floor = expr.contains_floor();
        let label = expr.to_string();
        CPlusFunction::from_body(Body::Expr { expr, ctx: QuadContext::new(cfg) }, None, floor, cfg, label)
    }

    pub fn parse(text: &str, cfg: QuadConfig) -> Result<Self, AlgebraError> {
        Ok(CPlusFunction::from_expr(crate::expr::parse(text)?, cfg))
    }

    /// Attach a caller-supplied growth certificate after checking it on
    /// samples of `[t0, 10·t0]`.
    pub fn with_growth(&self, cert: GrowthCertificate) -> Result<Self, AlgebraError> {
        cert.check_shape()?;
        if !(cert.c > 0.0) {
            return Err(AlgebraError::Certificate("certificate constant C must be positive".into()));
        }
        for i in 0..32 {
            let x = cert.t0 * 10f64.powf(i as f64 / 31.0);
            let v = self.eval(x)?;
            let b = cert.bound(x);
            if v.abs() > b * (1.0 + 1e-9) + 1e-12 {
                return Err(AlgebraError::Certificate(format!(
                    "|f({x})| = {} exceeds the certified bound {b}",
                    v.abs()
                )));
            }
        }
        let node = &self.0;
        let body = match &node.body {
            Body::Power(p) => Body::Power(p.clone()),
            _ => Body::Sum(vec![(1.0, self.clone())]),
        };
        Ok(CPlusFunction::from_body(body, Some(cert), node.floor, node.cfg, node.label.clone()))
    }

    pub fn growth(&self) -> Option<GrowthCertificate> {
        self.0.growth
    }

    pub fn has_floor(&self) -> bool {
        self.0.floor
    }

    pub fn breaks(&self) -> Breaks {
        if self.0.floor {
            Breaks::Integers
        } else {
            Breaks::None
        }
    }

    pub fn cfg(&self) -> &QuadConfig {
        &self.0.cfg
    }

    /// The exact power-sum form, when the numerator has one.
    pub fn as_power_sum(&self) -> Option<&PowerSum> {
        match &self.0.body {
            Body::Power(p) => Some(p),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        Ok(self.eval_est(x)?.value)
    }

    pub fn eval_est(&self, x: f64) -> Result<Estimate, EvalError> {
        if x < 0.0 {
            return Ok(Estimate::exact(0.0));
        }
        if x.is_nan() {
            return Err(EvalError::NonFinite { x });
        }
        let node = &self.0;
        let out = match &node.body {
            Body::Power(p) => Estimate::exact(p.eval(x)),
            Body::Expr { expr, ctx } => expr.eval_est(x, ctx)?,
            Body::Primitive { inner, order, cache } => {
                let f = |t: f64| inner.eval(t);
                let anchor = {
                    let mut c = cache.lock().unwrap_or_else(|e| e.into_inner());
                    c.extend_to(x, &f, &node.cfg)?;
                    c.anchor(x).expect("grid covers x")
                };
                CumulativeCache::partial(&anchor, x, *order, inner.breaks(), &f, &node.cfg)?
            }
            Body::Sum(terms) => {
                let mut value = 0.0;
                let mut err = 0.0;
                for (c, g) in terms {
                    let e = g.eval_est(x)?;
                    value += c * e.value;
                    err += c.abs() * e.err;
                }
                Estimate { value, err }
            }
            Body::XTimes(g) => {
                let e = g.eval_est(x)?;
                Estimate { value: x * e.value, err: x * e.err }
            }
            Body::Conv(f, g) => {
                let r = quad_with_breaks(
                    |t| Ok(f.eval(x - t)? * g.eval(t)?),
                    0.0,
                    x,
                    g.breaks(),
                    &node.cfg,
                )?;
                Estimate { value: r.value, err: r.err }
            }
        };
        if !out.value.is_finite() {
            return Err(EvalError::NonFinite { x });
        }
        Ok(out)
    }

    /// `∫_0^{t0} |f|`, used when propagating certificates through primitives.
    fn abs_integral(&self, t0: f64) -> Result<f64, AlgebraError> {
        let r = quad_with_breaks(|t| Ok(self.eval(t)?.abs()), 0.0, t0, self.breaks(), &self.0.cfg.scaled(1e2))?;
        Ok(r.value + r.err)
    }

    fn sup_on(&self, t0: f64) -> Result<f64, AlgebraError> {
        let mut m: f64 = 0.0;
        for i in 0..=256 {
            m = m.max(self.eval(t0 * i as f64 / 256.0)?.abs());
        }
        Ok(m * 1.01)
    }

    /// `H^m ∗ f`, i.e. the m-fold primitive vanishing at 0.
    pub fn heaviside_convolve(&self, m: usize) -> Result<CPlusFunction, AlgebraError> {
        if m == 0 {
            return Ok(self.clone());
        }
        let cfg = self.0.cfg;
        if let Some(p) = self.as_power_sum() {
            if let Some(mut q) = p.primitive() {
                let mut ok = true;
                for _ in 1..m {
                    match q.primitive() {
                        Some(next) => q = next,
                        None => {
                            ok = false;
                            break;
                        }
                    }
                }
                if ok {
                    return Ok(CPlusFunction::power_sum(q, cfg));
                }
            }
        }
        if m > MAX_CUMULATIVE_ORDER {
            return self.heaviside_convolve(MAX_CUMULATIVE_ORDER)?.heaviside_convolve(m - MAX_CUMULATIVE_ORDER);
        }
        let mut growth = self.growth();
        if let Some(g) = growth {
            let mut j0 = self.abs_integral(g.t0)?;
            for j in 1..=m {
                let cur = growth.unwrap();
                growth = Some(primitive_growth(&cur, j0));
                j0 *= g.t0 / j as f64;
            }
        }
        Ok(match &self.0.body {
            Body::Primitive { inner, order, .. } if order + m <= MAX_CUMULATIVE_ORDER => {
                self.wrap_primitive(inner.clone(), order + m, growth)
            }
            _ => self.wrap_primitive(self.clone(), m, growth),
        })
    }

    fn wrap_primitive(&self, inner: CPlusFunction, order: usize, growth: Option<GrowthCertificate>) -> CPlusFunction {
        let label = if order == 1 { format!("H∗({inner})") } else { format!("H^{order}∗({inner})") };
        let floor = inner.has_floor();
        let cache = Mutex::new(CumulativeCache::new(order, inner.breaks()));
        CPlusFunction::from_body(Body::Primitive { inner, order, cache }, growth, floor, self.0.cfg, label)
    }

    /// `Σ c_i f_i`.
    pub fn linear_combination(terms: Vec<(f64, CPlusFunction)>, cfg: QuadConfig) -> CPlusFunction {
        let terms: Vec<(f64, CPlusFunction)> = terms.into_iter().filter(|t| t.0 != 0.0).collect();
        if terms.iter().all(|t| t.1.as_power_sum().is_some()) {
            let sum = terms
                .iter()
                .fold(PowerSum::zero(), |acc, (c, f)| acc.add(&f.as_power_sum().unwrap().scale(*c)));
            return CPlusFunction::power_sum(sum, cfg);
        }
        let growth = sum_growth(&terms);
        let floor = terms.iter().any(|t| t.1.has_floor());
        let label = terms
            .iter()
            .enumerate()
            .map(|(i, (c, f))| match (i, *c) {
                (0, c) if c == 1.0 => format!("({f})"),
                (0, c) => format!("{c}·({f})"),
                (_, c) if c == 1.0 => format!(" + ({f})"),
                (_, c) if c == -1.0 => format!(" - ({f})"),
                (_, c) if c < 0.0 => format!(" - {}·({f})", -c),
                (_, c) => format!(" + {c}·({f})"),
            })
            .collect::<String>();
        CPlusFunction::from_body(Body::Sum(terms), growth, floor, cfg, label)
    }

    /// `x·f(x)`.
    pub fn times_x(&self) -> CPlusFunction {
        if let Some(p) = self.as_power_sum() {
            return CPlusFunction::power_sum(p.mul_x(), self.0.cfg);
        }
        let growth = self.growth().map(|g| match g.kind {
            GrowthKind::Power { p } => GrowthCertificate::power(p + 1.0, g.c, g.t0),
            GrowthKind::Exponential { sigma } => {
                let eps = (0.01 * sigma.abs()).max(1e-3);
                GrowthCertificate::exponential(sigma + eps, g.c / (std::f64::consts::E * eps), g.t0)
            }
        });
        CPlusFunction::from_body(
            Body::XTimes(self.clone()),
            growth,
            self.has_floor(),
            self.0.cfg,
            format!("x·({self})"),
        )
    }

    /// `(f ∗ g)(x) = ∫_0^x f(x-t) g(t) dt`.
    pub fn convolve(&self, other: &CPlusFunction) -> Result<CPlusFunction, AlgebraError> {
        let cfg = self.0.cfg;
        if let (Some(p), Some(q)) = (self.as_power_sum(), other.as_power_sum()) {
            if let Some(r) = p.conv(q) {
                return Ok(CPlusFunction::power_sum(r, cfg));
            }
        }
        // A polynomial factor turns the convolution into iterated primitives:
        // x^n ∗ g = n! H^{n+1} ∗ g.
        for (poly, g) in [(self, other), (other, self)] {
            if let Some(coeffs) = poly.as_power_sum().and_then(PowerSum::polynomial_coeffs) {
                let mut terms = Vec::new();
                let mut fact = 1.0;
                for (n, c) in coeffs.iter().enumerate() {
                    if n > 0 {
                        fact *= n as f64;
                    }
                    if *c != 0.0 {
                        terms.push((c * fact, g.heaviside_convolve(n + 1)?));
                    }
                }
                return Ok(CPlusFunction::linear_combination(terms, cfg));
            }
        }
        // Keep jumps of the inner factor at integer abscissae.
        let (f, g) = if self.has_floor() && !other.has_floor() { (other, self) } else { (self, other) };
        let growth = conv_growth(f, g)?;
        let label = format!("({f})∗({g})");
        Ok(CPlusFunction::from_body(
            Body::Conv(f.clone(), g.clone()),
            growth,
            f.has_floor() || g.has_floor(),
            cfg,
            label,
        ))
    }
}

fn primitive_growth(g: &GrowthCertificate, i0: f64) -> GrowthCertificate {
    match g.kind {
        GrowthKind::Power { p } if p > -1.0 => GrowthCertificate::power(p + 1.0, i0 + g.c / (p + 1.0), g.t0),
        GrowthKind::Power { p } if p < -1.0 => {
            GrowthCertificate::power(0.0, i0 + g.c * g.t0.powf(p + 1.0) / (-p - 1.0), g.t0)
        }
        // ln(x) <= (2/e)·x^{1/2}
        GrowthKind::Power { .. } => GrowthCertificate::power(0.5, i0 + g.c * 2.0 / std::f64::consts::E, g.t0),
        GrowthKind::Exponential { sigma } if sigma > 0.0 => {
            GrowthCertificate::exponential(sigma, i0 + g.c / sigma, g.t0)
        }
        GrowthKind::Exponential { sigma } if sigma < 0.0 => {
            GrowthCertificate::power(0.0, i0 + g.c * (sigma * g.t0).exp() / -sigma, g.t0)
        }
        GrowthKind::Exponential { .. } => GrowthCertificate::power(1.0, i0 + g.c, g.t0),
    }
}

fn sum_growth(terms: &[(f64, CPlusFunction)]) -> Option<GrowthCertificate> {
    let certs: Option<Vec<(f64, GrowthCertificate)>> = terms.iter().map(|(c, f)| f.growth().map(|g| (*c, g))).collect();
    let certs = certs?;
    let t0 = certs.iter().map(|t| t.1.t0).fold(1.0, f64::max);
    let sigma = certs
        .iter()
        .filter_map(|t| match t.1.kind {
            GrowthKind::Exponential { sigma } => Some(sigma),
            _ => None,
        })
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.max(s))));
    match sigma {
        None => {
            let p = certs
                .iter()
                .map(|t| match t.1.kind {
                    GrowthKind::Power { p } => p,
                    _ => unreachable!(),
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let c = certs.iter().map(|(k, g)| k.abs() * g.c).sum();
            Some(GrowthCertificate::power(p.max(f64::MIN), c, t0))
        }
        Some(s) => {
            let s = if s > 0.0 { s } else { 1e-3 };
            let c = certs.iter().map(|(k, g)| k.abs() * g.as_exponential(s).c).sum();
            Some(GrowthCertificate::exponential(s, c, t0))
        }
    }
}

fn conv_growth(f: &CPlusFunction, g: &CPlusFunction) -> Result<Option<GrowthCertificate>, AlgebraError> {
    let (Some(a), Some(b)) = (f.growth(), g.growth()) else {
        return Ok(None);
    };
    let t0 = a.t0.max(b.t0);
    match (a.kind, b.kind) {
        (GrowthKind::Power { p }, GrowthKind::Power { p: q }) => {
            // |f∗g|(x) <= x·sup|f|·sup|g| on [0, x], and sup|f| <= A + c x^p.
            let (p, q) = (p.max(0.0), q.max(0.0));
            let cf = f.sup_on(t0)? + a.c * t0.powf(-p).max(1.0);
            let cg = g.sup_on(t0)? + b.c * t0.powf(-q).max(1.0);
            Ok(Some(GrowthCertificate::power(p + q + 1.0, cf * cg, t0)))
        }
        _ => {
            let sigma = match (a.kind, b.kind) {
                (GrowthKind::Exponential { sigma: s }, GrowthKind::Exponential { sigma: r }) => s.max(r),
                (GrowthKind::Exponential { sigma: s }, _) | (_, GrowthKind::Exponential { sigma: s }) => s,
                _ => unreachable!(),
            }
            .max(1e-3);
            let ea = a.as_exponential(sigma);
            let eb = b.as_exponential(sigma);
            // ∫ e^{σ(x-t)} e^{σt} dt = x e^{σx} <= e^{2σx}/(eσ).
            let cf = f.sup_on(t0)? + ea.c;
            let cg = g.sup_on(t0)? + eb.c;
            Ok(Some(GrowthCertificate::exponential(
                2.0 * sigma,
                cf * cg / (std::f64::consts::E * sigma),
                t0,
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    #[test]
    fn negative_half_line_is_zero() {
        let f = CPlusFunction::parse("exp(x) + 3", cfg()).unwrap();
        assert_eq!(f.eval(-1.0).unwrap(), 0.0);
        assert_eq!(f.eval(-1e300).unwrap(), 0.0);
        assert!((f.eval(0.0).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn heaviside_convolve_examples() {
        let h = CPlusFunction::heaviside(cfg());
        assert!((h.heaviside_convolve(1).unwrap().eval(2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((h.heaviside_convolve(2).unwrap().eval(3.0).unwrap() - 4.5).abs() < 1e-14);
        let s = CPlusFunction::parse("x^0.5", cfg()).unwrap().heaviside_convolve(1).unwrap();
        assert!((s.eval(4.0).unwrap() - 2.0 / 3.0 * 8.0).abs() < 1e-13);
    }

    #[test]
    fn numeric_primitive_matches_closed_form() {
        let f = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        let p3 = f.heaviside_convolve(3).unwrap();
        // H^3 ∗ sin = x²/2 - 1 + cos x
        for &x in &[0.5, 7.0, 31.5, 48.0] {
            let want = x * x / 2.0 - 1.0 + f64::cos(x);
            assert!((p3.eval(x).unwrap() - want).abs() < 1e-8 * (1.0 + want.abs()));
        }
        let split = f.heaviside_convolve(1).unwrap().heaviside_convolve(2).unwrap();
        assert!((split.eval(20.0).unwrap() - p3.eval(20.0).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn convolution_examples() {
        let h = CPlusFunction::heaviside(cfg());
        assert!((h.convolve(&h).unwrap().eval(2.0).unwrap() - 2.0).abs() < 1e-14);
        let x = CPlusFunction::parse("x", cfg()).unwrap();
        assert!((x.convolve(&x).unwrap().eval(3.0).unwrap() - 4.5).abs() < 1e-13);
        let s = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        let e = CPlusFunction::parse("exp(-x)", cfg()).unwrap();
        let a = s.convolve(&e).unwrap();
        let b = e.convolve(&s).unwrap();
        for &t in &[0.3, 2.0, 9.5] {
            assert!((a.eval(t).unwrap() - b.eval(t).unwrap()).abs() < 1e-8);
        }
    }

    #[test]
    fn certificates() {
        let f = CPlusFunction::parse("x^2 + 3", cfg()).unwrap();
        let g = f.growth().unwrap();
        assert_eq!(g.kind, GrowthKind::Power { p: 2.0 });
        assert!(f.heaviside_convolve(1).unwrap().growth().is_some());
        let s = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        assert!(s.growth().is_none());
        assert!(s.with_growth(GrowthCertificate::power(0.0, 0.5, 1.0)).is_err());
        let s = s.with_growth(GrowthCertificate::power(0.0, 1.0, 1.0)).unwrap();
        let p = s.heaviside_convolve(2).unwrap().growth().unwrap();
        assert_eq!(p.kind, GrowthKind::Power { p: 2.0 });
        for &x in &[1.0, 10.0, 100.0, 1000.0] {
            let v = s.heaviside_convolve(2).unwrap().eval(x).unwrap();
            assert!(v.abs() <= p.bound(x));
        }
    }
}
