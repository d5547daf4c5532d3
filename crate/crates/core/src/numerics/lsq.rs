//! Weighted linear least squares via SVD, and polynomial fitting in a
//! Chebyshev basis.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::FitError;

const RANK_THRESHOLD: f64 = 1e-13;

/// Chebyshev points of the first kind on `[a, b]`, ascending.
pub fn chebyshev_nodes(a: f64, b: f64, n: usize) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut xs: Vec<f64> = (0..n)
        .map(|i| {
            let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
            mid + half * theta.cos()
        })
        .collect();
    xs.reverse();
    xs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstsqSolution {
    pub coeffs: Vec<f64>,
    /// Weighted root-mean-square residual `sqrt(Σ w r² / Σ w)`.
    pub residual_rms: f64,
    pub max_residual: f64,
    /// Row index of the largest absolute residual.
    pub witness: usize,
    pub residuals: Vec<f64>,
    /// Ratio of smallest to largest singular value of the normalized design.
    pub condition: f64,
}

/// Solve `min Σ w_i (Σ_j c_j A_ij - y_i)²` with columns given separately.
pub fn weighted_lstsq(columns: &[Vec<f64>], rhs: &[f64], weights: Option<&[f64]>) -> Result<LstsqSolution, FitError> {
    let rows = rhs.len();
    let cols = columns.len();
    if cols == 0 {
        return Err(FitError::RankDeficient("empty design".into()));
    }
    if rows < cols {
        return Err(FitError::TooFewPoints { needed: cols, got: rows });
    }
    if columns.iter().any(|c| c.len() != rows) || weights.is_some_and(|w| w.len() != rows) {
        return Err(FitError::RankDeficient("mismatched column lengths".into()));
    }
    let w: Vec<f64> = weights.map(|w| w.to_vec()).unwrap_or_else(|| vec![1.0; rows]);
    if rhs.iter().chain(w.iter()).chain(columns.iter().flatten()).any(|v| !v.is_finite())
        || w.iter().any(|&v| v < 0.0)
    {
        return Err(FitError::NonFinite);
    }
    let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();

    let mut a = DMatrix::<f64>::zeros(rows, cols);
    let mut norms = vec![0.0; cols];
    for (j, col) in columns.iter().enumerate() {
        for i in 0..rows {
            a[(i, j)] = col[i] * sw[i];
        }
        let n = a.column(j).norm();
        if n == 0.0 {
            return Err(FitError::RankDeficient(format!("column {j} vanishes on the sample")));
        }
        norms[j] = n;
        a.column_mut(j).scale_mut(1.0 / n);
    }
    let b = DVector::from_iterator(rows, (0..rows).map(|i| rhs[i] * sw[i]));

    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let threshold = RANK_THRESHOLD * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > threshold).count();
    if rank < cols {
        return Err(FitError::RankDeficient(format!("numerical rank {rank} of {cols} columns")));
    }
    let x = svd
        .solve(&b, threshold)
        .map_err(|e| FitError::RankDeficient(e.to_string()))?;
    let coeffs: Vec<f64> = (0..cols).map(|j| x[j] / norms[j]).collect();

    let mut residuals = vec![0.0; rows];
    let mut ss = 0.0;
    let mut wsum = 0.0;
    let mut max_residual: f64 = 0.0;
    let mut witness = 0;
    for i in 0..rows {
        let fit: f64 = columns.iter().zip(&coeffs).map(|(c, k)| c[i] * k).sum();
        let r = fit - rhs[i];
        residuals[i] = r;
        ss += w[i] * r * r;
        wsum += w[i];
        if r.abs() > max_residual {
            max_residual = r.abs();
            witness = i;
        }
    }
    let residual_rms = if wsum > 0.0 { (ss / wsum).sqrt() } else { 0.0 };
    Ok(LstsqSolution { coeffs, residual_rms, max_residual, witness, residuals, condition: smin / smax })
}

/// Least-squares polynomial of fixed degree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFit {
    /// Monomial coefficients in `x`, constant term first.
    pub coeffs: Vec<f64>,
    /// Chebyshev coefficients in the mapped variable `(x - center) / half_width`.
    pub cheb: Vec<f64>,
    pub center: f64,
    pub half_width: f64,
    pub residual_rms: f64,
    pub max_residual: f64,
    /// Abscissa of the largest absolute residual.
    pub witness: f64,
}

impl PolyFit {
    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.half_width;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.cheb.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        t * b1 - b2 + self.cheb.first().copied().unwrap_or(0.0)
    }
}

/// Fit a polynomial of degree `degree`. At least `degree + 2` distinct
/// abscissae are required so that the residual carries information.
pub fn lsq_polyfit(points: &[(f64, f64)], degree: usize, weights: Option<&[f64]>) -> Result<PolyFit, FitError> {
    let needed = degree + 2;
    let mut xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    if xs.len() < needed {
        return Err(FitError::TooFewPoints { needed, got: xs.len() });
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let lo = xs[0];
    let hi = *xs.last().unwrap();
    let center = 0.5 * (lo + hi);
    let half_width = 0.5 * (hi - lo);

    let ts: Vec<f64> = points.iter().map(|p| (p.0 - center) / half_width).collect();
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(degree + 1);
    columns.push(vec![1.0; ts.len()]);
    if degree >= 1 {
        columns.push(ts.clone());
    }
    for n in 2..=degree {
        let col = (0..ts.len()).map(|i| 2.0 * ts[i] * columns[n - 1][i] - columns[n - 2][i]).collect();
        columns.push(col);
    }
    let rhs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let sol = weighted_lstsq(&columns, &rhs, weights)?;

    let coeffs = chebyshev_to_monomial(&sol.coeffs, center, half_width);
    Ok(PolyFit {
        coeffs,
        cheb: sol.coeffs,
        center,
        half_width,
        residual_rms: sol.residual_rms,
        max_residual: sol.max_residual,
        witness: points[sol.witness].0,
    })
}

/// Expand `Σ c_n T_n((x - center)/h)` into monomials in `x`.
fn chebyshev_to_monomial(cheb: &[f64], center: f64, h: f64) -> Vec<f64> {
    let n = cheb.len();
    // Power-basis coefficients in t of each T_k.
    let mut in_t = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    if n > 0 {
        prev[0] = 1.0;
        for k in 0..n {
            in_t[k] += cheb[0] * prev[k];
        }
    }
    if n > 1 {
        cur[1] = 1.0;
        for k in 0..n {
            in_t[k] += cheb[1] * cur[k];
        }
    }
    for deg in 2..n {
        let mut next = vec![0.0; n];
        for k in 0..n {
            if k + 1 < n {
                next[k + 1] += 2.0 * cur[k];
            }
            next[k] -= prev[k];
        }
        for k in 0..n {
            in_t[k] += cheb[deg] * next[k];
        }
        prev = cur;
        cur = next;
    }
    // Horner composition with t = (x - center)/h.
    let mut out = vec![0.0; n.max(1)];
    for &c in in_t.iter().rev() {
        let mut next = vec![0.0; out.len()];
        for k in 0..out.len() {
            if k + 1 < out.len() {
                next[k + 1] += out[k] / h;
            }
            next[k] -= out[k] * center / h;
        }
        next[0] += c;
        out = next;
    }
    out
}
