//! Finite sums `Σ c_i x^{a_i}` with real exponents, the exact fast path for
//! power-type numerators.

use serde::{Deserialize, Serialize};

use super::eval::apply_binary;
use super::{BinOp, Expr, Func};
use crate::special::gamma;

/// Terms beyond this count are not expanded (e.g. `(1 + x)^40`).
const MAX_TERMS: usize = 64;

/// Sorted by exponent, one term per exponent, no zero coefficients.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PowerSum {
    terms: Vec<(f64, f64)>,
}

impl PowerSum {
    pub fn zero() -> Self {
        PowerSum { terms: Vec::new() }
    }

    pub fn constant(c: f64) -> Self {
        PowerSum::monomial(c, 0.0)
    }

    pub fn monomial(c: f64, a: f64) -> Self {
        PowerSum::from_terms([(a, c)])
    }

    /// Build from `(exponent, coefficient)` pairs in any order.
    pub fn from_terms(terms: impl IntoIterator<Item = (f64, f64)>) -> Self {
        let mut v: Vec<(f64, f64)> = terms.into_iter().collect();
        v.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(v.len());
        for (a, c) in v {
            match out.last_mut() {
                Some(last) if last.0 == a => last.1 += c,
                _ => out.push((a, c)),
            }
        }
        out.retain(|t| t.1 != 0.0);
        PowerSum { terms: out }
    }

    /// Polynomial from coefficients, constant term first.
    pub fn polynomial(coeffs: &[f64]) -> Self {
        PowerSum::from_terms(coeffs.iter().enumerate().map(|(i, &c)| (i as f64, c)))
    }

    /// `(exponent, coefficient)` pairs in increasing exponent order.
    pub fn terms(&self) -> &[(f64, f64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_polynomial(&self) -> bool {
        self.terms.iter().all(|&(a, _)| a >= 0.0 && a == a.trunc())
    }

    /// Polynomial coefficients (constant first) when this is a polynomial.
    pub fn polynomial_coeffs(&self) -> Option<Vec<f64>> {
        if !self.is_polynomial() {
            return None;
        }
        let deg = self.terms.last().map_or(0, |t| t.0 as usize);
        let mut out = vec![0.0; deg + 1];
        for &(a, c) in &self.terms {
            out[a as usize] = c;
        }
        Some(out)
    }

    pub fn max_exponent(&self) -> Option<f64> {
        self.terms.last().map(|t| t.0)
    }

    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.0)
    }

    pub fn abs_coeff_sum(&self) -> f64 {
        self.terms.iter().map(|t| t.1.abs()).sum()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.terms.iter().map(|&(a, c)| c * apply_binary(BinOp::Pow, x, a)).sum()
    }

    pub fn add(&self, other: &PowerSum) -> PowerSum {
        PowerSum::from_terms(self.terms.iter().chain(other.terms.iter()).copied())
    }

    pub fn scale(&self, k: f64) -> PowerSum {
        PowerSum::from_terms(self.terms.iter().map(|&(a, c)| (a, c * k)))
    }

    pub fn mul_x(&self) -> PowerSum {
        PowerSum::from_terms(self.terms.iter().map(|&(a, c)| (a + 1.0, c)))
    }

    pub fn mul(&self, other: &PowerSum) -> Option<PowerSum> {
        if self.terms.len() * other.terms.len() > MAX_TERMS * MAX_TERMS {
            return None;
        }
        let out = PowerSum::from_terms(
            self.terms
                .iter()
                .flat_map(|&(a, c)| other.terms.iter().map(move |&(b, d)| (a + b, c * d))),
        );
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    fn powf(&self, p: f64) -> Option<PowerSum> {
        if self.is_zero() {
            return (p > 0.0).then(PowerSum::zero);
        }
        if let [(a, c)] = self.terms[..] {
            if c > 0.0 || p == p.trunc() {
                return Some(PowerSum::monomial(apply_binary(BinOp::Pow, c, p), a * p));
            }
            return None;
        }
        if p >= 0.0 && p == p.trunc() && p <= 16.0 {
            let mut acc = PowerSum::constant(1.0);
            for _ in 0..p as u32 {
                acc = acc.mul(self)?;
            }
            return Some(acc);
        }
        None
    }

    /// Antiderivative `Σ c x^{a+1}/(a+1)`; `None` when some `a = -1`.
    pub fn antiderivative(&self) -> Option<PowerSum> {
        if self.terms.iter().any(|t| t.0 == -1.0) {
            return None;
        }
        Some(PowerSum::from_terms(self.terms.iter().map(|&(a, c)| (a + 1.0, c / (a + 1.0)))))
    }

    /// `∫_0^x` of the sum; requires every exponent `> -1`.
    pub fn primitive(&self) -> Option<PowerSum> {
        if self.terms.iter().any(|t| t.0 <= -1.0) {
            return None;
        }
        self.antiderivative()
    }

    /// Convolution on `[0, x]` via `x^a ∗ x^b = B(a+1, b+1) x^{a+b+1}`.
    pub fn conv(&self, other: &PowerSum) -> Option<PowerSum> {
        if self.terms.iter().chain(other.terms.iter()).any(|t| t.0 <= -1.0) {
            return None;
        }
        if self.terms.len() * other.terms.len() > MAX_TERMS * MAX_TERMS {
            return None;
        }
        let mut terms = Vec::new();
        for &(a, c) in &self.terms {
            for &(b, d) in &other.terms {
                let beta = gamma(a + 1.0).ok()? * gamma(b + 1.0).ok()? / gamma(a + b + 2.0).ok()?;
                terms.push((a + b + 1.0, c * d * beta));
            }
        }
        let out = PowerSum::from_terms(terms);
        (out.terms.len() <= MAX_TERMS).then_some(out)
    }

    pub fn to_expr(&self) -> Expr {
        let mut acc: Option<Expr> = None;
        for &(a, c) in &self.terms {
            let monomial = if a == 0.0 {
                None
            } else if a == 1.0 {
                Some(Expr::Var)
            } else {
                Some(Expr::pow(Expr::Var, a))
            };
            let term = match monomial {
                None => Expr::Const(c),
                Some(m) if c == 1.0 => m,
                Some(m) => Expr::binary(BinOp::Mul, Expr::Const(c), m),
            };
            acc = Some(match acc {
                None => term,
                Some(prev) => Expr::binary(BinOp::Add, prev, term),
            });
        }
        acc.unwrap_or(Expr::Const(0.0))
    }
}

impl Expr {
    /// Recognize the expression as a power sum, valid for `x >= 0`.
    pub fn as_power_sum(&self) -> Option<PowerSum> {
        match self {
            Expr::Const(c) => Some(PowerSum::constant(*c)),
            Expr::Var => Some(PowerSum::monomial(1.0, 1.0)),
            Expr::Neg(a) => Some(a.as_power_sum()?.scale(-1.0)),
            Expr::Binary(op, l, r) => {
                let a = l.as_power_sum()?;
                let b = r.as_power_sum()?;
                match op {
                    BinOp::Add => Some(a.add(&b)),
                    BinOp::Sub => Some(a.add(&b.scale(-1.0))),
                    BinOp::Mul => a.mul(&b),
                    BinOp::Div => match b.terms[..] {
                        [(e, c)] => a.mul(&PowerSum::monomial(1.0 / c, -e)),
                        _ => None,
                    },
                    BinOp::Pow => match (b.terms.len(), b.terms.first()) {
                        (0, _) => Some(PowerSum::constant(1.0)),
                        (1, Some(&(e, p))) if e == 0.0 => a.powf(p),
                        _ => None,
                    },
                }
            }
            Expr::Call(Func::Sqrt, a) => a.as_power_sum()?.powf(0.5),
            Expr::Call(..) | Expr::CumInt(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn recognizes_power_sums() {
        let p = parse("3*x^2.5 - x/2 + sqrt(x) * x + 4").unwrap().as_power_sum().unwrap();
        assert_eq!(p.terms(), &[(0.0, 4.0), (1.0, -0.5), (1.5, 1.0), (2.5, 3.0)]);
        assert!(parse("sin(x)").unwrap().as_power_sum().is_none());
        assert!(parse("1/(1+x)").unwrap().as_power_sum().is_none());
        let sq = parse("(1+x)^3").unwrap().as_power_sum().unwrap();
        assert_eq!(sq.polynomial_coeffs().unwrap(), vec![1.0, 3.0, 3.0, 1.0]);
    }

    #[test]
    fn convolution_beta() {
        let x = PowerSum::monomial(1.0, 1.0);
        let xx = x.conv(&x).unwrap();
        assert!((xx.eval(3.0) - 4.5).abs() < 1e-13);
        let h = PowerSum::constant(1.0);
        assert!((h.conv(&h).unwrap().eval(2.0) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn primitive_requires_integrability() {
        assert!(PowerSum::monomial(1.0, -1.5).primitive().is_none());
        assert!(PowerSum::monomial(1.0, -1.5).antiderivative().is_some());
        let half = PowerSum::monomial(1.0, 0.5).primitive().unwrap();
        assert!((half.eval(4.0) - 2.0 / 3.0 * 8.0).abs() < 1e-14);
    }

    #[test]
    fn to_expr_evaluates_identically() {
        let ctx = crate::expr::QuadContext::default();
        let p = PowerSum::from_terms([(0.0, 1.5), (1.0, -2.0), (3.5, 0.25)]);
        let e = p.to_expr();
        for &x in &[0.0, 0.7, 12.0] {
            assert!((e.eval(x, &ctx).unwrap() - p.eval(x)).abs() < 1e-12 * (1.0 + p.eval(x).abs()));
        }
    }
}
