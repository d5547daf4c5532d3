//! The numerator DSL: a small expression language in one variable `x`.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := NUMBER | 'x' | 'pi' | FUNC '(' expr ')' | 'I[' expr ']' | '(' expr ')'
//! FUNC    := 'exp' | 'ln' | 'sin' | 'cos' | 'sqrt' | 'abs' | 'floor'
//! ```
//!
//! `^` is right-associative and binds tighter than unary minus, so `-x^2`
//! is `-(x^2)` and `2^3^2` is `2^9`. `I[e]` is the cumulative integral
//! `t ↦ ∫_0^t e(s) ds`; it may not be nested.

mod eval;
mod parse;
mod power;

pub use eval::QuadContext;
pub use parse::{parse, ParseError, MAX_NESTING};
pub use power::PowerSum;

use std::fmt;

use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
    Floor,
}

impl Func {
    pub const ALL: [Func; 7] = [Func::Exp, Func::Ln, Func::Sin, Func::Cos, Func::Sqrt, Func::Abs, Func::Floor];

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Floor => "floor",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn json_name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Pow => "pow",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Call(Func, Box<Expr>),
    CumInt(Box<Expr>),
}

const NEG_PRECEDENCE: u8 = 3;
const ATOM_PRECEDENCE: u8 = 5;

impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn pow(base: Expr, exponent: f64) -> Expr {
        Expr::binary(BinOp::Pow, base, Expr::Const(exponent))
    }

    fn any(&self, pred: &dyn Fn(&Expr) -> bool) -> bool {
        if pred(self) {
            return true;
        }
        match self {
            Expr::Const(_) | Expr::Var => false,
            Expr::Binary(_, l, r) => l.any(pred) || r.any(pred),
            Expr::Neg(a) | Expr::Call(_, a) | Expr::CumInt(a) => a.any(pred),
        }
    }

    /// True when the value depends on `x` (directly or through `I[...]`).
    pub fn depends_on_x(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Var | Expr::CumInt(_)))
    }

    pub fn contains_floor(&self) -> bool {
        self.any(&|e| matches!(e, Expr::Call(Func::Floor, _)))
    }

    pub fn contains_cumint(&self) -> bool {
        self.any(&|e| matches!(e, Expr::CumInt(_)))
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var => 1,
            Expr::Binary(_, l, r) => 1 + l.size() + r.size(),
            Expr::Neg(a) | Expr::Call(_, a) | Expr::CumInt(a) => 1 + a.size(),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Expr::Const(v) => json!({ "const": v }),
            Expr::Var => json!({ "var": "x" }),
            Expr::Binary(op, l, r) => json!({ "op": op.json_name(), "args": [l.to_json(), r.to_json()] }),
            Expr::Neg(a) => json!({ "op": "neg", "args": [a.to_json()] }),
            Expr::Call(f, a) => json!({ "fn": f.name(), "arg": a.to_json() }),
            Expr::CumInt(a) => json!({ "cumint": a.to_json() }),
        }
    }

    /// Closed-form antiderivative for sums of terms `c·x^a` with `a ≠ -1`.
    pub fn antiderivative_exact(&self) -> Option<Expr> {
        self.as_power_sum()?.antiderivative().map(|p| p.to_expr())
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Binary(op, _, _) => op.precedence(),
            Expr::Neg(_) => NEG_PRECEDENCE,
            _ => ATOM_PRECEDENCE,
        }
    }

    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        let paren = self.precedence() < min;
        if paren {
            f.write_str("(")?;
        }
        match self {
            Expr::Const(v) => fmt_const(*v, f)?,
            Expr::Var => f.write_str("x")?,
            Expr::Binary(op, l, r) => {
                let p = op.precedence();
                let (lmin, rmin) = match op {
                    // Base of a power must be an atom; the exponent is parsed as a unary.
                    BinOp::Pow => (ATOM_PRECEDENCE, NEG_PRECEDENCE),
                    _ => (p, p + 1),
                };
                l.fmt_prec(f, lmin)?;
                write!(f, " {} ", op.symbol())?;
                r.fmt_prec(f, rmin)?;
            }
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.fmt_prec(f, NEG_PRECEDENCE)?;
            }
            Expr::Call(func, a) => {
                write!(f, "{}(", func.name())?;
                a.fmt_prec(f, 0)?;
                f.write_str(")")?;
            }
            Expr::CumInt(a) => {
                f.write_str("I[")?;
                a.fmt_prec(f, 0)?;
                f.write_str("]")?;
            }
        }
        if paren {
            f.write_str(")")?;
        }
        Ok(())
    }
}

fn fmt_const(v: f64, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let body = if v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) {
        format!("{:e}", v.abs())
    } else {
        format!("{}", v.abs())
    };
    if v.is_sign_negative() {
        write!(f, "(-{body})")
    } else {
        f.write_str(&body)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_round_trips_structure() {
        for src in [
            "x^2",
            "-x^2",
            "(-x)^2",
            "2^3^x",
            "(2^x)^3",
            "a",
            "1 - (x - 2)",
            "x / (x * 3)",
            "I[floor(x) - x + 1/2]",
            "exp(-x) * sin(x)",
            "--x",
            "x - -1e-30",
        ] {
            let Ok(e) = parse(src) else { continue };
            let printed = e.to_string();
            assert_eq!(parse(&printed).unwrap(), e, "{src} -> {printed}");
        }
    }

    #[test]
    fn json_shape() {
        let e = parse("sin(x) + 2").unwrap();
        assert_eq!(
            e.to_json(),
            json!({"op": "add", "args": [{"fn": "sin", "arg": {"var": "x"}}, {"const": 2.0}]})
        );
    }

    #[test]
    fn antiderivatives() {
        let ctx = QuadContext::default();
        let f = parse("x^2").unwrap().antiderivative_exact().unwrap();
        assert!((f.eval(3.0, &ctx).unwrap() - 9.0).abs() < 1e-14);
        let g = parse("3 + 2*x").unwrap().antiderivative_exact().unwrap();
        assert!((g.eval(2.0, &ctx).unwrap() - 10.0).abs() < 1e-14);
        assert!(parse("floor(x)").unwrap().antiderivative_exact().is_none());
        assert!(parse("1/x").unwrap().antiderivative_exact().is_none());
    }

    #[test]
    fn structural_queries() {
        let e = parse("I[floor(x)] + 2^3").unwrap();
        assert!(e.contains_floor());
        assert!(e.contains_cumint());
        assert!(e.depends_on_x());
        assert!(!parse("sqrt(2) * pi").unwrap().depends_on_x());
    }
}
