//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Relative tolerance below which a column counts as linearly dependent.
const COLLINEAR_TOL: f64 = 1e-10;

/// Indices of columns that are (numerically) linear combinations of the
/// columns before them, found by modified Gram-Schmidt.
pub fn collinear_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(x.ncols());
    let mut dependent = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        let mut v = col;
        for q in &basis {
            let proj = q.dot(&v);
            v.axpy(-proj, q, 1.0);
        }
        let norm = v.norm();
        if norm0 == 0.0 || norm <= COLLINEAR_TOL * norm0.max(1.0) {
            dependent.push(j);
        } else {
            basis.push(v / norm);
        }
    }
    dependent
}

/// Fails with the names of collinear columns if `x` lacks full column rank.
pub fn require_full_rank(x: &DMatrix<f64>, names: &[String]) -> Result<()> {
    let dependent = collinear_columns(x);
    if dependent.is_empty() {
        Ok(())
    } else {
        Err(Error::RankDeficient(
            dependent
                .into_iter()
                .map(|j| names.get(j).cloned().unwrap_or_else(|| format!("x{j}")))
                .collect(),
        ))
    }
}

pub fn cholesky(a: DMatrix<f64>, what: &str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a).ok_or_else(|| Error::Numerical(format!("{what} is not positive definite")))
}

/// Ordinary least squares through the normal equations.
pub struct LeastSquares {
    chol: Cholesky<f64, Dyn>,
}

impl LeastSquares {
    pub fn new(x: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        require_full_rank(x, names)?;
        let xtx = x.tr_mul(x);
        Ok(Self {
            chol: cholesky(xtx, "X'X")?,
        })
    }

    pub fn coefficients(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(&x.tr_mul(y))
    }

    pub fn residuals(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        y - x * self.coefficients(x, y)
    }

    /// (X'X)^{-1}
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Two-sided p-value of a standard-normal test statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    let normal = Normal::standard();
    (2.0 * normal.cdf(-z.abs())).clamp(0.0, 1.0)
}

/// Multiplies each length-`n` block of `v` by the symmetric operator `op`.
pub fn blockwise<F>(v: &DVector<f64>, n: usize, mut op: F) -> DVector<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let mut out = DVector::zeros(v.len());
    for (src, dst) in v.as_slice().chunks(n).zip(out.as_mut_slice().chunks_mut(n)) {
        op(src, dst);
    }
    out
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
