//! Precedence-climbing parser with character-offset diagnostics.

use thiserror::Error;

use super::eval::{apply_binary, apply_func};
use super::{BinOp, Expr, Func};

/// Deepest allowed nesting of parentheses, calls and unary minus.
pub const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {position}: {message}")]
pub struct ParseError {
    /// Character offset into the input, at most the input length.
    pub position: usize,
    pub message: String,
}

pub fn parse(text: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { chars: text.chars().collect(), pos: 0, depth: 0, in_cumint: false };
    let e = p.expr()?;
    p.skip_ws();
    if let Some(c) = p.peek() {
        return Err(p.error_at(p.pos, format!("unexpected '{c}' after expression")));
    }
    Ok(e)
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    depth: usize,
    in_cumint: bool,
}

impl Parser {
    fn error_at(&self, position: usize, message: impl Into<String>) -> ParseError {
        ParseError { position: position.min(self.chars.len()), message: message.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        self.skip_ws();
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.error_at(self.pos, format!("expected '{c}', found '{got}'"))),
            None => Err(self.error_at(self.pos, format!("expected '{c}', found end of input"))),
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error_at(self.pos, format!("nesting deeper than {MAX_NESTING}")));
        }
        Ok(())
    }

    fn leave(&mut self) {
        self.depth -= 1;
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        self.enter()?;
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('+') => BinOp::Add,
                Some('-') => BinOp::Sub,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = fold(op, lhs, rhs);
        }
        self.leave();
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            self.skip_ws();
            let op = match self.peek() {
                Some('*') => BinOp::Mul,
                Some('/') => BinOp::Div,
                _ => break,
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = fold(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        if self.peek() == Some('-') {
            self.pos += 1;
            self.enter()?;
            let operand = self.unary()?;
            self.leave();
            return Ok(match operand {
                Expr::Const(v) => Expr::Const(-v),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        self.skip_ws();
        if self.peek() != Some('^') {
            return Ok(base);
        }
        self.pos += 1;
        self.skip_ws();
        let start = self.pos;
        self.enter()?;
        let exponent = self.unary()?;
        self.leave();
        if exponent.depends_on_x() {
            return Err(self.error_at(start, "exponent must be constant"));
        }
        Ok(fold(BinOp::Pow, base, exponent))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        self.skip_ws();
        let start = self.pos;
        match self.peek() {
            None => Err(self.error_at(start, "expected operand, found end of input")),
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.identifier(),
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) => Err(self.error_at(start, format!("unexpected '{c}'"))),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Parser| {
            let s = p.pos;
            while p.peek().is_some_and(|c| c.is_ascii_digit()) {
                p.pos += 1;
            }
            p.pos - s
        };
        let mut mantissa = digits(self);
        if self.peek() == Some('.') {
            self.pos += 1;
            mantissa += digits(self);
        }
        if mantissa == 0 {
            return Err(self.error_at(start, "malformed number"));
        }
        if matches!(self.peek(), Some('e' | 'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek(), Some('+' | '-')) {
                self.pos += 1;
            }
            if digits(self) == 0 {
                self.pos = save;
            }
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        let v: f64 = text.parse().map_err(|_| self.error_at(start, format!("malformed number '{text}'")))?;
        if !v.is_finite() {
            return Err(self.error_at(start, format!("number '{text}' is out of range")));
        }
        Ok(Expr::Const(v))
    }

    fn identifier(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let name: String = self.chars[start..self.pos].iter().collect();
        match name.as_str() {
            "x" => Ok(Expr::Var),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "I" => {
                self.skip_ws();
                if self.peek() != Some('[') {
                    return Err(self.error_at(self.pos, "expected '[' after I"));
                }
                if self.in_cumint {
                    return Err(self.error_at(start, "nested I[...] is not supported"));
                }
                self.pos += 1;
                self.in_cumint = true;
                let inner = self.expr();
                self.in_cumint = false;
                let inner = inner?;
                self.expect(']')?;
                Ok(Expr::CumInt(Box::new(inner)))
            }
            _ => {
                let Some(func) = Func::from_name(&name) else {
                    return Err(self.error_at(start, format!("unknown identifier '{name}'")));
                };
                self.expect('(')?;
                let arg = self.expr()?;
                self.expect(')')?;
                Ok(match arg {
                    Expr::Const(v) => match apply_func(func, v) {
                        Some(r) if r.is_finite() => Expr::Const(r),
                        _ => Expr::call(func, Expr::Const(v)),
                    },
                    other => Expr::call(func, other),
                })
            }
        }
    }
}

/// Build a binary node, folding it when both sides are constants and the
/// result is finite. Folding uses the evaluator's own arithmetic.
fn fold(op: BinOp, l: Expr, r: Expr) -> Expr {
    if let (Expr::Const(a), Expr::Const(b)) = (&l, &r) {
        let v = apply_binary(op, *a, *b);
        if v.is_finite() {
            return Expr::Const(v);
        }
    }
    Expr::binary(op, l, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::QuadContext;
    use proptest::prelude::*;

    fn val(src: &str, x: f64) -> f64 {
        parse(src).unwrap().eval(x, &QuadContext::default()).unwrap()
    }

    #[test]
    fn grammar_examples() {
        assert_eq!(parse("x^2").unwrap(), Expr::pow(Expr::Var, 2.0));
        let saw = parse("floor(x) - x + 1/2").unwrap();
        assert_eq!(
            saw,
            Expr::binary(
                BinOp::Add,
                Expr::binary(BinOp::Sub, Expr::call(Func::Floor, Expr::Var), Expr::Var),
                Expr::Const(0.5)
            )
        );
        assert!(matches!(parse("I[floor(x) - x + 1/2]").unwrap(), Expr::CumInt(_)));
    }

    #[test]
    fn precedence() {
        assert_eq!(val("2+3*4", 0.0), 14.0);
        assert_eq!(val("2^3^1", 0.0), 8.0);
        assert_eq!(val("2^3^2", 0.0), 512.0);
        assert_eq!(val("-x^2", 3.0), -9.0);
        assert_eq!(val("2^-1", 0.0), 0.5);
        assert_eq!(val("8/4/2", 0.0), 1.0);
        assert_eq!(val("1-2-3", 0.0), -4.0);
        assert_eq!(val("1.5e1 + .5", 0.0), 15.5);
    }

    #[test]
    fn error_positions() {
        assert_eq!(parse("((x").unwrap_err().position, 3);
        assert_eq!(parse("x + foo(x)").unwrap_err().position, 4);
        assert_eq!(parse("x^x").unwrap_err().position, 2);
        assert_eq!(parse("2^(1+I[x])").unwrap_err().position, 2);
        assert_eq!(parse("I[x + I[x]]").unwrap_err().position, 6);
        assert_eq!(parse("x)").unwrap_err().position, 1);
        assert_eq!(parse("").unwrap_err().position, 0);
        assert_eq!(parse("1e999").unwrap_err().position, 0);
        assert_eq!(parse("sin x").unwrap_err().position, 4);
        assert_eq!(parse("2x").unwrap_err().position, 1);
    }

    #[test]
    fn nesting_limit() {
        let deep = "(".repeat(10_000) + "x" + &")".repeat(10_000);
        let err = parse(&deep).unwrap_err();
        assert!(err.message.contains("nesting"));
        let negs = "-".repeat(10_000) + "x";
        assert!(parse(&negs).is_err());
        let ok = "(".repeat(100) + "x" + &")".repeat(100);
        assert_eq!(parse(&ok).unwrap(), Expr::Var);
    }

    #[test]
    fn constant_folding_is_exact() {
        assert_eq!(parse("1/3").unwrap(), Expr::Const(1.0 / 3.0));
        assert_eq!(parse("sqrt(2)").unwrap(), Expr::Const(2f64.sqrt()));
        // Domain errors are left for evaluation.
        assert!(matches!(parse("ln(-1)").unwrap(), Expr::Call(Func::Ln, _)));
    }

    proptest! {
        #[test]
        fn never_panics(s in "\\PC{0,40}") {
            if let Err(e) = parse(&s) {
                prop_assert!(e.position <= s.chars().count());
            }
        }

        #[test]
        fn never_panics_on_dsl_alphabet(s in "[-+*/^()\\[\\]x0-9.eIsinlncoqrtabfp ]{0,60}") {
            if let Err(e) = parse(&s) {
                prop_assert!(e.position <= s.chars().count());
            }
        }
    }
}
