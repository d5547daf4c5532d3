//! Error types shared across the evaluation and quadrature layers.
//!
//! Expression evaluation and quadrature are mutually recursive (a `CumInt`
//! node is evaluated by quadrature, and quadrature evaluates expressions), so
//! their errors live together here.

use thiserror::Error;

/// Failure while evaluating a numerator at a point.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {func}({arg}) at x = {x}")]
    Domain { func: &'static str, arg: f64, x: f64 },
    #[error("non-finite result at x = {x}")]
    NonFinite { x: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(Box<QuadError>),
}

impl From<QuadError> for EvalError {
    fn from(e: QuadError) -> Self {
        EvalError::Quadrature(Box::new(e))
    }
}

/// Failure of an adaptive or semi-infinite quadrature.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    /// Refinement hit the depth or panel limit before the tolerance was met.
    /// The best available value and its error estimate are kept.
    #[error("depth exceeded: best value {value:?} with error estimate {err_est:e}")]
    DepthExceeded { value: Vec<f64>, err_est: f64 },
    #[error("integrand failed: {0}")]
    Integrand(Box<EvalError>),
    #[error("divergent tail: {0}")]
    DivergentTail(String),
    #[error("invalid quadrature configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid interval [{a}, {b}]")]
    InvalidInterval { a: f64, b: f64 },
}

impl From<EvalError> for QuadError {
    fn from(e: EvalError) -> Self {
        QuadError::Integrand(Box::new(e))
    }
}

/// Failure of a least-squares fit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("rank-deficient design: {0}")]
    RankDeficient(String),
    #[error("non-finite data in fit")]
    NonFinite,
}

/// Failure of a special-function evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("pole at {0}")]
    Pole(f64),
    #[error("overflow for argument {0}")]
    Overflow(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
