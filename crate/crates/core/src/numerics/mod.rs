//! Deterministic quadrature, cumulative-integral caching and least-squares
//! fitting used by every higher layer.
//!
//! The quadrature kernel is a 7/15-point Gauss–Kronrod pair driven by a
//! global adaptive bisection loop. Values may be real, complex or small
//! fixed-size vectors (see [`QuadValue`]); the vector form lets the
//! cumulative cache integrate all iterated-primitive kernels of a panel in a
//! single pass.

mod cumulative;
mod lsq;
mod quad;

pub use cumulative::{Anchor, CumulativeCache, MAX_ORDER as MAX_CUMULATIVE_ORDER};
pub use lsq::{chebyshev_nodes, lsq_polyfit, weighted_lstsq, LstsqSolution, PolyFit};
pub use quad::{
    quad, quad_semi_infinite, quad_with_breaks, QuadResult, SemiInfiniteResult, TailModel,
};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::QuadError;

/// Tolerances and limits for every quadrature in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum bisection depth of a panel relative to its seed panel.
    pub max_depth: u32,
    /// Target bound for the truncated tail of a semi-infinite integral.
    pub tail_tol: f64,
    /// Hard cap on the number of live panels in one adaptive run.
    pub max_panels: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_depth: 60,
            tail_tol: 1e-10,
            max_panels: 4_000_000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<(), QuadError> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.abs_tol) || !positive(self.rel_tol) || !positive(self.tail_tol) {
            return Err(QuadError::InvalidConfig(format!(
                "tolerances must be positive (abs {}, rel {}, tail {})",
                self.abs_tol, self.rel_tol, self.tail_tol
            )));
        }
        if self.max_depth < 10 {
            return Err(QuadError::InvalidConfig(format!(
                "max_depth must be at least 10, got {}",
                self.max_depth
            )));
        }
        if self.max_panels < 16 {
            return Err(QuadError::InvalidConfig("max_panels must be at least 16".into()));
        }
        Ok(())
    }

    /// Same configuration with all tolerances multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        QuadConfig {
            abs_tol: self.abs_tol * factor,
            rel_tol: self.rel_tol * factor,
            tail_tol: self.tail_tol * factor,
            ..*self
        }
    }
}

/// A value together with an absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err: f64,
}

impl Estimate {
    pub const fn exact(value: f64) -> Self {
        Estimate { value, err: 0.0 }
    }
}

/// Forced panel boundaries for integrands with known jump locations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Breaks {
    #[default]
    None,
    /// Integer abscissae are panel boundaries (integrands built on `floor`).
    Integers,
}

impl Breaks {
    pub fn union(self, other: Breaks) -> Breaks {
        if self == Breaks::Integers || other == Breaks::Integers {
            Breaks::Integers
        } else {
            Breaks::None
        }
    }
}

/// Something a quadrature rule can accumulate: a fixed number of real parts.
pub trait QuadValue: Copy + Send + Sync + 'static {
    const PARTS: usize;
    fn zero() -> Self;
    fn part(&self, i: usize) -> f64;
    fn set_part(&mut self, i: usize, v: f64);

    fn add(self, other: Self) -> Self {
        let mut out = self;
        for i in 0..Self::PARTS {
            out.set_part(i, self.part(i) + other.part(i));
        }
        out
    }

    fn scale(self, c: f64) -> Self {
        let mut out = self;
        for i in 0..Self::PARTS {
            out.set_part(i, self.part(i) * c);
        }
        out
    }

    fn norm(&self) -> f64 {
        (0..Self::PARTS).fold(0.0, |m, i| m.max(self.part(i).abs()))
    }

    fn is_finite(&self) -> bool {
        (0..Self::PARTS).all(|i| self.part(i).is_finite())
    }

    fn parts(&self) -> Vec<f64> {
        (0..Self::PARTS).map(|i| self.part(i)).collect()
    }
}

impl QuadValue for f64 {
    const PARTS: usize = 1;
    fn zero() -> Self {
        0.0
    }
    fn part(&self, _: usize) -> f64 {
        *self
    }
    fn set_part(&mut self, _: usize, v: f64) {
        *self = v;
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    const PARTS: usize = 2;
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn part(&self, i: usize) -> f64 {
        if i == 0 {
            self.re
        } else {
            self.im
        }
    }
    fn set_part(&mut self, i: usize, v: f64) {
        if i == 0 {
            self.re = v
        } else {
            self.im = v
        }
    }
    fn add(self, other: Self) -> Self {
        self + other
    }
    fn scale(self, c: f64) -> Self {
        self * c
    }
}

/// Fixed-size real vector, used for simultaneous kernel moments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vector<const N: usize>(pub [f64; N]);

impl<const N: usize> QuadValue for Vector<N> {
    const PARTS: usize = N;
    fn zero() -> Self {
        Vector([0.0; N])
    }
    fn part(&self, i: usize) -> f64 {
        self.0[i]
    }
    fn set_part(&mut self, i: usize, v: f64) {
        self.0[i] = v;
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
