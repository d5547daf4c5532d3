//! Cached iterated primitives `F_j(x) = (1/(j-1)!) ∫_0^x (x-t)^(j-1) f(t) dt`.
//!
//! Values of `F_1..F_m` are kept on an increasing grid starting at 0. A new
//! grid panel `[b, b']` is integrated once for all orders with a vector
//! quadrature of the kernels `u^(j-1) f(t)`, `u = (b'-t)/w`, and the Taylor
//! shift
//!
//! `F_j(b') = Σ_{i<j} w^i/i! F_{j-i}(b) + w^(j-1)/(j-1)! ∫ u^(j-1) f`.
//!
//! Off-grid points use the same shift from the nearest grid point on the
//! left plus a single scalar quadrature.

use super::{quad_with_breaks, Breaks, Estimate, QuadConfig, QuadValue, Vector};
use crate::error::{EvalError, QuadError};

pub const MAX_ORDER: usize = 16;

/// Grid point with the values and error bounds of `F_1..F_order` there.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub x: f64,
    pub vals: Vec<f64>,
    pub errs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct CumulativeCache {
    order: usize,
    breaks: Breaks,
    grid: Vec<f64>,
    vals: Vec<Vec<f64>>,
    errs: Vec<Vec<f64>>,
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

impl CumulativeCache {
    pub fn new(order: usize, breaks: Breaks) -> Self {
        assert!((1..=MAX_ORDER).contains(&order), "cumulative order {order} out of range");
        CumulativeCache {
            order,
            breaks,
            grid: vec![0.0],
            vals: vec![vec![0.0; order]],
            errs: vec![vec![0.0; order]],
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn grid_len(&self) -> usize {
        self.grid.len()
    }

    pub fn covered(&self) -> f64 {
        *self.grid.last().unwrap()
    }

    fn next_point(&self, b: f64) -> f64 {
        if self.breaks == Breaks::Integers || b < 32.0 {
            b + 1.0
        } else {
            b + (b / 16.0).floor()
        }
    }

    /// Grow the grid until it reaches at least `x`.
    pub fn extend_to<F>(&mut self, x: f64, f: &F, cfg: &QuadConfig) -> Result<(), QuadError>
    where
        F: Fn(f64) -> Result<f64, EvalError>,
    {
        while self.covered() < x {
            let b = self.covered();
            let b2 = self.next_point(b);
            let (moments, merr) = self.panel_moments(b, b2, f, cfg)?;
            let w = b2 - b;
            let last = self.vals.len() - 1;
            let mut vals = vec![0.0; self.order];
            let mut errs = vec![0.0; self.order];
            for j in 1..=self.order {
                let mut v = 0.0;
                let mut e = 0.0;
                let mut wp = 1.0;
                for i in 0..j {
                    v += wp / factorial(i) * self.vals[last][j - i - 1];
                    e += wp / factorial(i) * self.errs[last][j - i - 1];
                    wp *= w;
                }
                let c = w.powi(j as i32 - 1) / factorial(j - 1);
                v += c * moments[j - 1];
                e += c * merr;
                vals[j - 1] = v;
                errs[j - 1] = e;
            }
            self.grid.push(b2);
            self.vals.push(vals);
            self.errs.push(errs);
        }
        Ok(())
    }

    fn panel_moments<F>(&self, b: f64, b2: f64, f: &F, cfg: &QuadConfig) -> Result<(Vec<f64>, f64), QuadError>
    where
        F: Fn(f64) -> Result<f64, EvalError>,
    {
        match self.order {
            1 => moments::<1, F>(b, b2, f, self.breaks, cfg),
            2 => moments::<2, F>(b, b2, f, self.breaks, cfg),
            3..=4 => moments::<4, F>(b, b2, f, self.breaks, cfg),
            5..=8 => moments::<8, F>(b, b2, f, self.breaks, cfg),
            _ => moments::<16, F>(b, b2, f, self.breaks, cfg),
        }
    }

    /// Largest grid point not exceeding `x`, if the grid already covers `x`.
    pub fn anchor(&self, x: f64) -> Option<Anchor> {
        if x > self.covered() || x < 0.0 {
            return None;
        }
        let idx = self.grid.partition_point(|&g| g <= x).saturating_sub(1);
        Some(Anchor { x: self.grid[idx], vals: self.vals[idx].clone(), errs: self.errs[idx].clone() })
    }

    /// `F_m(x)` from an anchor at or left of `x`.
    pub fn partial<F>(
        anchor: &Anchor,
        x: f64,
        m: usize,
        breaks: Breaks,
        f: &F,
        cfg: &QuadConfig,
    ) -> Result<Estimate, QuadError>
    where
        F: Fn(f64) -> Result<f64, EvalError>,
    {
        assert!(m >= 1 && m <= anchor.vals.len());
        let d = x - anchor.x;
        let mut v = 0.0;
        let mut e = 0.0;
        let mut dp = 1.0;
        for i in 0..m {
            v += dp / factorial(i) * anchor.vals[m - i - 1];
            e += dp / factorial(i) * anchor.errs[m - i - 1];
            dp *= d;
        }
        if d > 0.0 {
            let scale = 1.0 / factorial(m - 1);
            let r = quad_with_breaks(
                |t| Ok(f(t)? * (x - t).powi(m as i32 - 1)),
                anchor.x,
                x,
                breaks,
                cfg,
            )?;
            v += scale * r.value;
            e += scale * r.err;
        }
        Ok(Estimate { value: v, err: e })
    }

    /// `F_m(x)` for `x >= 0`, growing the grid as needed.
    pub fn eval<F>(&mut self, x: f64, m: usize, f: &F, cfg: &QuadConfig) -> Result<Estimate, QuadError>
    where
        F: Fn(f64) -> Result<f64, EvalError>,
    {
        self.extend_to(x, f, cfg)?;
        let anchor = self.anchor(x).expect("grid covers x after extension");
        Self::partial(&anchor, x, m, self.breaks, f, cfg)
    }
}

fn moments<const N: usize, F>(
    b: f64,
    b2: f64,
    f: &F,
    breaks: Breaks,
    cfg: &QuadConfig,
) -> Result<(Vec<f64>, f64), QuadError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let w = b2 - b;
    let r = quad_with_breaks(
        |t| {
            let v = f(t)?;
            let u = (b2 - t) / w;
            let mut out = Vector([0.0; N]);
            let mut up = 1.0;
            for slot in out.0.iter_mut() {
                *slot = up * v;
                up *= u;
            }
            Ok(out)
        },
        b,
        b2,
        breaks,
        cfg,
    )?;
    Ok((r.value.parts(), r.err))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exact_primitive_of_cos(x: f64, m: usize) -> f64 {
        // m-fold primitive of cos vanishing at 0 with all lower derivatives.
        let mut taylor = 0.0;
        let mut term = 1.0;
        // cos(x - m pi/2) minus its Taylor polynomial of degree m-1.
        for n in 0..m {
            let deriv = (n as f64 * std::f64::consts::FRAC_PI_2 - m as f64 * std::f64::consts::FRAC_PI_2).cos();
            taylor += deriv * term;
            term *= x / (n + 1) as f64;
        }
        (x - m as f64 * std::f64::consts::FRAC_PI_2).cos() - taylor
    }

    #[test]
    fn matches_closed_form_for_cos() {
        let cfg = QuadConfig::default();
        let f = |t: f64| Ok(t.cos());
        let mut cache = CumulativeCache::new(6, Breaks::None);
        for &x in &[0.0, 0.3, 1.0, 7.25, 40.5, 90.0] {
            for m in 1..=6 {
                let got = cache.eval(x, m, &f, &cfg).unwrap();
                let want = exact_primitive_of_cos(x, m);
                assert!(
                    (got.value - want).abs() <= 1e-8 * (1.0 + want.abs()),
                    "x={x} m={m}: {} vs {want}",
                    got.value
                );
            }
        }
    }

    #[test]
    fn polynomial_primitives() {
        let cfg = QuadConfig::default();
        let f = |t: f64| Ok(t * t);
        let mut cache = CumulativeCache::new(3, Breaks::None);
        let x: f64 = 12.5;
        let got = cache.eval(x, 3, &f, &cfg).unwrap();
        assert!((got.value - x.powi(5) / 60.0).abs() < 1e-9 * x.powi(5));
    }

    #[test]
    fn floor_with_integer_grid() {
        let cfg = QuadConfig::default();
        let f = |t: f64| Ok(t.floor());
        let mut cache = CumulativeCache::new(1, Breaks::Integers);
        let got = cache.eval(5.5, 1, &f, &cfg).unwrap();
        assert!((got.value - (10.0 + 2.5)).abs() < 1e-12);
        assert_eq!(cache.covered(), 6.0);
    }

    #[test]
    fn grid_is_coarse_far_out() {
        let cfg = QuadConfig::default();
        let f = |t: f64| Ok((-t).exp());
        let mut cache = CumulativeCache::new(1, Breaks::None);
        cache.eval(10_000.0, 1, &f, &cfg).unwrap();
        assert!(cache.grid_len() < 200);
    }
}
