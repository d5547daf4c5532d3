//! Pointwise evaluation with propagated error bounds.

use std::collections::HashMap;
use std::sync::Mutex;

use super::{BinOp, Expr, Func};
use crate::error::{EvalError, QuadError};
use crate::numerics::{quad_with_breaks, Breaks, CumulativeCache, Estimate, QuadConfig};

/// Quadrature settings plus the cumulative caches of the `I[...]` nodes
/// evaluated through this context.
///
/// Caches are keyed by node address, so a context must only be used with
/// expressions that outlive it or with the expression it was created for.
/// Results do not depend on the order in which points are requested.
#[derive(Debug, Default)]
pub struct QuadContext {
    pub cfg: QuadConfig,
    caches: Mutex<HashMap<usize, CumulativeCache>>,
}

impl Clone for QuadContext {
    fn clone(&self) -> Self {
        QuadContext::new(self.cfg)
    }
}

impl QuadContext {
    pub fn new(cfg: QuadConfig) -> Self {
        QuadContext { cfg, caches: Mutex::new(HashMap::new()) }
    }

    fn cumulative(&self, node: &Expr, x: f64) -> Result<Estimate, EvalError> {
        let breaks = if node.contains_floor() { Breaks::Integers } else { Breaks::None };
        let f = |t: f64| node.eval(t, self);
        if x < 0.0 {
            let r = quad_with_breaks(&f, 0.0, x, breaks, &self.cfg)?;
            return Ok(Estimate { value: r.value, err: r.err });
        }
        let key = node as *const Expr as usize;
        let anchor = {
            let mut caches = self.caches.lock().unwrap_or_else(|e| e.into_inner());
            let cache = caches.entry(key).or_insert_with(|| CumulativeCache::new(1, breaks));
            cache.extend_to(x, &f, &self.cfg)?;
            cache.anchor(x).ok_or_else(|| QuadError::InvalidInterval { a: 0.0, b: x })?
        };
        Ok(CumulativeCache::partial(&anchor, x, 1, breaks, &f, &self.cfg)?)
    }
}

pub(crate) fn apply_binary(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Pow => {
            if b == b.trunc() && b.abs() <= 64.0 {
                a.powi(b as i32)
            } else {
                a.powf(b)
            }
        }
    }
}

/// `None` signals a domain error.
pub(crate) fn apply_func(f: Func, a: f64) -> Option<f64> {
    Some(match f {
        Func::Exp => a.exp(),
        Func::Ln => {
            if a < 0.0 {
                return None;
            }
            a.ln()
        }
        Func::Sin => a.sin(),
        Func::Cos => a.cos(),
        Func::Sqrt => {
            if a < 0.0 {
                return None;
            }
            a.sqrt()
        }
        Func::Abs => a.abs(),
        Func::Floor => a.floor(),
    })
}

fn derivative_bound(f: Func, a: f64) -> f64 {
    match f {
        Func::Exp => a.exp(),
        Func::Ln => 1.0 / a.abs(),
        Func::Sin | Func::Cos => 1.0,
        Func::Sqrt => 0.5 / a.sqrt(),
        Func::Abs => 1.0,
        Func::Floor => 0.0,
    }
}

impl Expr {
    /// Value at `x`; `I[...]` nodes are integrated with `ctx`.
    pub fn eval(&self, x: f64, ctx: &QuadContext) -> Result<f64, EvalError> {
        Ok(self.eval_est(x, ctx)?.value)
    }

    /// Value at `x` with a first-order bound on the error inherited from
    /// quadrature inside `I[...]` nodes.
    pub fn eval_est(&self, x: f64, ctx: &QuadContext) -> Result<Estimate, EvalError> {
        let out = match self {
            Expr::Const(v) => Estimate::exact(*v),
            Expr::Var => Estimate::exact(x),
            Expr::Neg(a) => {
                let a = a.eval_est(x, ctx)?;
                Estimate { value: -a.value, err: a.err }
            }
            Expr::Binary(op, l, r) => {
                let a = l.eval_est(x, ctx)?;
                let b = r.eval_est(x, ctx)?;
                let value = apply_binary(*op, a.value, b.value);
                let err = match op {
                    BinOp::Add | BinOp::Sub => a.err + b.err,
                    BinOp::Mul => a.value.abs() * b.err + b.value.abs() * a.err + a.err * b.err,
                    BinOp::Div => (a.err + value.abs() * b.err) / b.value.abs(),
                    BinOp::Pow => {
                        if a.err == 0.0 {
                            0.0
                        } else {
                            (b.value * apply_binary(BinOp::Pow, a.value, b.value - 1.0)).abs() * a.err
                        }
                    }
                };
                Estimate { value, err }
            }
            Expr::Call(f, a) => {
                let a = a.eval_est(x, ctx)?;
                let value = apply_func(*f, a.value).ok_or(EvalError::Domain { func: f.name(), arg: a.value, x })?;
                let err = if a.err == 0.0 {
                    0.0
                } else if *f == Func::Floor {
                    if (a.value - a.value.round()).abs() <= a.err {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    derivative_bound(*f, a.value) * a.err
                };
                Estimate { value, err }
            }
            Expr::CumInt(inner) => ctx.cumulative(inner, x)?,
        };
        if !out.value.is_finite() {
            return Err(EvalError::NonFinite { x });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn basic_values() {
        let ctx = QuadContext::default();
        assert_eq!(parse("x^2").unwrap().eval(3.0, &ctx).unwrap(), 9.0);
        assert_eq!(parse("floor(x) - x + 1/2").unwrap().eval(2.25, &ctx).unwrap(), 0.25);
        assert_eq!(parse("floor(x)").unwrap().eval(-0.5, &ctx).unwrap(), -1.0);
    }

    #[test]
    fn domain_and_non_finite_errors() {
        let ctx = QuadContext::default();
        assert!(matches!(parse("ln(x)").unwrap().eval(-1.0, &ctx), Err(EvalError::Domain { func: "ln", .. })));
        assert!(matches!(parse("sqrt(x)").unwrap().eval(-1.0, &ctx), Err(EvalError::Domain { .. })));
        assert!(matches!(parse("1/x").unwrap().eval(0.0, &ctx), Err(EvalError::NonFinite { .. })));
        assert!(matches!(parse("ln(x)").unwrap().eval(0.0, &ctx), Err(EvalError::NonFinite { .. })));
    }

    #[test]
    fn sawtooth_primitive_vanishes_at_integers() {
        let ctx = QuadContext::default();
        let e = parse("I[floor(x) - x + 1/2]").unwrap();
        for n in 0..40 {
            let v = e.eval(n as f64, &ctx).unwrap();
            assert!(v.abs() < 1e-12, "n = {n}: {v}");
        }
        // Exact primitive on [n, n+1): (u - u²)/2 with u the fractional part.
        for &x in &[0.25, 3.5, 17.9, 33.01] {
            let u: f64 = x - f64::floor(x);
            let v = e.eval(x, &ctx).unwrap();
            assert!((v - (u - u * u) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cumint_negative_argument() {
        let ctx = QuadContext::default();
        let e = parse("I[x]").unwrap();
        assert!((e.eval(-2.0, &ctx).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn cumint_error_is_reported() {
        let ctx = QuadContext::default();
        let e = parse("I[exp(x)]").unwrap().eval_est(5.0, &ctx).unwrap();
        assert!((e.value - (5f64.exp() - 1.0)).abs() <= e.err.max(1e-9));
        assert!(e.err > 0.0);
    }
}
