//! Operators `f/H^k`: construction, ring operations, the generalized
//! derivative, multiplication by `x`, and windowed numeric equality.

mod function;

pub use function::{CPlusFunction, GrowthCertificate, GrowthKind};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{EvalError, QuadError};
use crate::expr::{ParseError, PowerSum};
use crate::numerics::{chebyshev_nodes, QuadConfig};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlgebraError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid operator literal: {0}")]
    Literal(String),
    #[error("denominator exponent must be at least 1, got {0}")]
    InvalidLevel(u32),
    #[error("growth certificate rejected: {0}")]
    Certificate(String),
}

impl From<QuadError> for AlgebraError {
    fn from(e: QuadError) -> Self {
        AlgebraError::Eval(e.into())
    }
}

/// The operator `num/H^k`.
#[derive(Clone, Debug)]
pub struct Operator {
    pub num: CPlusFunction,
    pub k: u32,
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{}\"/H^{}", self.num, self.k)
    }
}

impl Operator {
    pub fn new(num: CPlusFunction, k: u32) -> Result<Operator, AlgebraError> {
        if k == 0 {
            return Err(AlgebraError::InvalidLevel(k));
        }
        Ok(Operator { num, k })
    }

    /// Parse `"<expr>"/H^<k>`; `/H` alone means `k = 1`.
    pub fn parse_literal(text: &str, cfg: QuadConfig) -> Result<Operator, AlgebraError> {
        let s = text.trim();
        let rest = s
            .strip_prefix('"')
            .ok_or_else(|| AlgebraError::Literal(format!("expected a quoted expression in {s:?}")))?;
        let close = rest
            .find('"')
            .ok_or_else(|| AlgebraError::Literal("missing closing quote".into()))?;
        let (body, tail) = (&rest[..close], rest[close + 1..].trim());
        let tail = tail
            .strip_prefix('/')
            .ok_or_else(|| AlgebraError::Literal(format!("expected '/H^k' after the expression, found {tail:?}")))?
            .trim();
        let tail = tail
            .strip_prefix('H')
            .ok_or_else(|| AlgebraError::Literal(format!("expected 'H' in denominator, found {tail:?}")))?
            .trim();
        let k = if tail.is_empty() {
            1
        } else {
            let digits = tail
                .strip_prefix('^')
                .ok_or_else(|| AlgebraError::Literal(format!("unexpected {tail:?} after H")))?
                .trim();
            digits
                .parse::<u32>()
                .map_err(|_| AlgebraError::Literal(format!("denominator exponent {digits:?} is not a positive integer")))?
        };
        Operator::new(CPlusFunction::parse(body, cfg)?, k)
    }

    pub fn zero(cfg: QuadConfig) -> Operator {
        Operator { num: CPlusFunction::power_sum(PowerSum::zero(), cfg), k: 1 }
    }

    /// `δ = H²/H²`, numerator `x`.
    pub fn delta(cfg: QuadConfig) -> Operator {
        Operator { num: CPlusFunction::power_sum(PowerSum::monomial(1.0, 1.0), cfg), k: 2 }
    }

    /// `W_f = (H ∗ f)/H`.
    pub fn embed(f: &CPlusFunction) -> Result<Operator, AlgebraError> {
        Ok(Operator { num: f.heaviside_convolve(1)?, k: 1 })
    }

    /// `(H^m ∗ f)/H^{k+m}`, the same operator at a higher level.
    pub fn lift(&self, m: u32) -> Result<Operator, AlgebraError> {
        Ok(Operator { num: self.num.heaviside_convolve(m as usize)?, k: self.k + m })
    }

    /// Both operands lifted to a common level.
    pub fn common_level(&self, other: &Operator) -> Result<(Operator, Operator), AlgebraError> {
        let k = self.k.max(other.k);
        Ok((self.lift(k - self.k)?, other.lift(k - other.k)?))
    }

    pub fn add(&self, other: &Operator) -> Result<Operator, AlgebraError> {
        let (a, b) = self.common_level(other)?;
        let cfg = *self.num.cfg();
        Ok(Operator { num: CPlusFunction::linear_combination(vec![(1.0, a.num), (1.0, b.num)], cfg), k: a.k })
    }

    pub fn sub(&self, other: &Operator) -> Result<Operator, AlgebraError> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, c: f64) -> Operator {
        let cfg = *self.num.cfg();
        Operator { num: CPlusFunction::linear_combination(vec![(c, self.num.clone())], cfg), k: self.k }
    }

    /// `(f ∗ g)/H^{n+m}`.
    pub fn mul(&self, other: &Operator) -> Result<Operator, AlgebraError> {
        Ok(Operator { num: self.num.convolve(&other.num)?, k: self.k + other.k })
    }

    /// `D(f/H^k) = f/H^{k+1}`.
    pub fn derivative(&self) -> Operator {
        Operator { num: self.num.clone(), k: self.k + 1 }
    }

    pub fn derivative_n(&self, n: u32) -> Operator {
        Operator { num: self.num.clone(), k: self.k + n }
    }

    /// `xW = (x f - k H∗f)/H^k`, after promoting `k = 1` to level 2.
    pub fn mul_by_x(&self) -> Result<Operator, AlgebraError> {
        let w = if self.k == 1 { self.lift(1)? } else { self.clone() };
        let cfg = *w.num.cfg();
        let hf = w.num.heaviside_convolve(1)?;
        let num = CPlusFunction::linear_combination(vec![(1.0, w.num.times_x()), (-(w.k as f64), hf)], cfg);
        Ok(Operator { num, k: w.k })
    }

    /// Numerator at `x` (zero for `x < 0`).
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        self.num.eval(x)
    }

    /// Windowed equality test.
    pub fn equals(&self, other: &Operator, opts: &EqualsOptions) -> Result<Equality, AlgebraError> {
        let (a, b) = self.common_level(other)?;
        let xs = opts.grid();
        let rows: Result<Vec<(f64, f64, f64, f64)>, EvalError> = xs
            .par_iter()
            .map(|&x| {
                let u = a.num.eval_est(x)?;
                let v = b.num.eval_est(x)?;
                Ok((x, u.value, v.value, u.err + v.err))
            })
            .collect();
        let rows = rows?;
        let scale = rows.iter().map(|r| r.1.abs().max(r.2.abs())).fold(0.0, f64::max);
        let allowance = opts.tol * (1.0 + scale);
        let mut equal = true;
        let mut max_diff: f64 = 0.0;
        let mut witness = rows[0].0;
        let mut err_est: f64 = 0.0;
        for &(x, u, v, e) in &rows {
            let d = (u - v).abs();
            if d > allowance + e {
                equal = false;
            }
            if d > max_diff {
                max_diff = d;
                witness = x;
            }
            err_est = err_est.max(e);
        }
        Ok(Equality { equal, max_diff, scale, witness, err_est, tol: opts.tol, level: a.k })
    }
}

/// Sampling window and tolerance for [`Operator::equals`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EqualsOptions {
    pub x_max: f64,
    pub points: usize,
    pub tol: f64,
}

impl Default for EqualsOptions {
    fn default() -> Self {
        EqualsOptions { x_max: 50.0, points: 256, tol: 1e-7 }
    }
}

impl EqualsOptions {
    pub fn with_tol(tol: f64) -> Self {
        EqualsOptions { tol, ..EqualsOptions::default() }
    }

    fn grid(&self) -> Vec<f64> {
        chebyshev_nodes(0.0, self.x_max, self.points.max(2))
    }
}

/// Outcome of a windowed equality test. `equal == false` carries the
/// abscissa of the largest discrepancy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equality {
    pub equal: bool,
    pub max_diff: f64,
    pub scale: f64,
    pub witness: f64,
    /// Largest propagated evaluation error on the grid.
    pub err_est: f64,
    pub tol: f64,
    /// Common level the numerators were compared at.
    pub level: u32,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig {
        QuadConfig::default()
    }

    fn op(lit: &str) -> Operator {
        Operator::parse_literal(lit, cfg()).unwrap()
    }

    fn eq(a: &Operator, b: &Operator) -> bool {
        a.equals(b, &EqualsOptions::default()).unwrap().equal
    }

    #[test]
    fn literal_syntax() {
        let w = op("\"I[floor(x)-x+1/2]\" / H^2");
        assert_eq!(w.k, 2);
        assert_eq!(op("\"x\"/H").k, 1);
        for bad in ["x/H^2", "\"x\"", "\"x\"/G^2", "\"x\"/H^0", "\"x\"/H^-1", "\"x\"/H^2 extra", "\"x"] {
            assert!(Operator::parse_literal(bad, cfg()).is_err(), "{bad}");
        }
    }

    #[test]
    fn delta_is_identity() {
        let d = Operator::delta(cfg());
        for lit in ["\"x^2\"/H^1", "\"sin(x)\"/H^3", "\"exp(-x)\"/H^2"] {
            let w = op(lit);
            assert!(eq(&d.mul(&w).unwrap(), &w), "{lit}");
        }
        assert!(eq(&d.mul(&d).unwrap(), &d));
    }

    #[test]
    fn delta_representatives() {
        let d = Operator::delta(cfg());
        let d3 = op("\"x^2/2\"/H^3");
        assert!(eq(&d, &d3));
        let lifted = d.lift(1).unwrap();
        assert!((lifted.eval(3.0).unwrap() - 4.5).abs() < 1e-14);
    }

    #[test]
    fn additive_inverse_and_separation() {
        let w = op("\"sin(x) + x^2\"/H^2");
        assert!(eq(&w.add(&w.scale(-1.0)).unwrap(), &Operator::zero(cfg())));
        let f = CPlusFunction::parse("x", cfg()).unwrap();
        let g = CPlusFunction::parse("x + 0.01", cfg()).unwrap();
        let r = Operator::embed(&f).unwrap().equals(&Operator::embed(&g).unwrap(), &EqualsOptions::default()).unwrap();
        assert!(!r.equal);
        assert!(r.witness > 45.0);
    }

    #[test]
    fn embedding_examples() {
        let h = CPlusFunction::heaviside(cfg());
        let eh = Operator::embed(&h).unwrap();
        let x = CPlusFunction::parse("x", cfg()).unwrap();
        assert!(eq(&eh.mul(&eh).unwrap(), &Operator::embed(&x).unwrap()));
        let f = CPlusFunction::parse("x^2", cfg()).unwrap();
        let ef = Operator::embed(&f).unwrap();
        assert!(eq(&ef, &ef.lift(3).unwrap()));
        assert!(eq(&ef, &op("\"x^3/3\"/H")));
    }

    #[test]
    fn derivative_of_embedding() {
        let f = CPlusFunction::parse("x^2", cfg()).unwrap();
        let df = CPlusFunction::parse("2*x", cfg()).unwrap();
        assert!(eq(&Operator::embed(&f).unwrap().derivative(), &Operator::embed(&df).unwrap()));
        let s = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        let c = CPlusFunction::parse("cos(x)", cfg()).unwrap();
        assert!(eq(&Operator::embed(&s).unwrap().derivative(), &Operator::embed(&c).unwrap()));
    }

    #[test]
    fn x_multiplication() {
        let s = CPlusFunction::parse("sin(x)", cfg()).unwrap();
        let xs = CPlusFunction::parse("x*sin(x)", cfg()).unwrap();
        let lhs = Operator::embed(&s).unwrap().mul_by_x().unwrap();
        assert!(lhs.equals(&Operator::embed(&xs).unwrap(), &EqualsOptions::with_tol(1e-7)).unwrap().equal);
        let xd = Operator::delta(cfg()).mul_by_x().unwrap();
        assert!(eq(&xd, &Operator::zero(cfg())));
    }

    #[test]
    fn leibniz_rule() {
        for lit in ["\"x^3 + 2\"/H^2", "\"cos(x)\"/H^1", "\"x*sin(x)\"/H^4"] {
            let w = op(lit);
            let lhs = w.mul_by_x().unwrap().derivative();
            let rhs = w.add(&w.derivative().mul_by_x().unwrap()).unwrap();
            assert!(eq(&lhs, &rhs), "{lit}");
        }
    }
}
