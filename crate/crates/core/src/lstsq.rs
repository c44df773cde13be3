//! Dense least squares via SVD with a relative singular-value cutoff.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LstsqError {
    #[error("system has no usable singular values (rows {rows}, cols {cols})")]
    RankDeficient { rows: usize, cols: usize },
    #[error("insufficient rows: {rows} < {cols}")]
    Underdetermined { rows: usize, cols: usize },
    #[error("singular value decomposition failed to converge")]
    NoConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LstsqReport {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    /// `sigma_max / sigma_min` of the column-equilibrated matrix
    pub condition: f64,
    /// `||A x - b||_2`
    pub residual: f64,
}

/// Minimises `||A x - b||` after scaling every column of `A` to unit norm.
/// Singular values below `rtol * sigma_max` are discarded.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> Result<(DVector<f64>, LstsqReport), LstsqError> {
    let (rows, cols) = a.shape();
    if rows < cols {
        return Err(LstsqError::Underdetermined { rows, cols });
    }
    let scale: Vec<f64> = (0..cols)
        .map(|j| {
            let n = a.column(j).norm();
            if n > 0.0 {
                1.0 / n
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }
    let m = faer::Mat::<f64>::from_fn(rows, cols, |i, j| scaled[(i, j)]);
    let svd = m.thin_svd().map_err(|_| LstsqError::NoConvergence)?;
    let (u, v) = (svd.U(), svd.V());
    let sigma: Vec<f64> = (0..cols).map(|k| svd.S()[k]).collect();
    let smax = sigma.iter().cloned().fold(0.0, f64::max);
    if !(smax > 0.0) || !smax.is_finite() {
        return Err(LstsqError::RankDeficient { rows, cols });
    }
    let cutoff = rtol * smax;
    let rank = sigma.iter().filter(|&&s| s > cutoff).count();
    let smin = sigma.iter().cloned().filter(|&s| s > cutoff).fold(f64::INFINITY, f64::min);
    let mut y = vec![0.0; cols];
    for (k, &s) in sigma.iter().enumerate().filter(|(_, &s)| s > cutoff) {
        let c = (0..rows).map(|i| u[(i, k)] * b[i]).sum::<f64>() / s;
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += v[(j, k)] * c;
        }
    }
    let x = DVector::from_iterator(cols, y.iter().zip(&scale).map(|(v, s)| v * s));
    let residual = (a * &x - b).norm();
    Ok((
        x,
        LstsqReport {
            rows,
            cols,
            rank,
            condition: smax / smin,
            residual,
        },
    ))
}

/// Real unknowns, complex equations: stacks real and imaginary parts of
/// every row.
pub fn solve_complex_rows(
    rows: &[Vec<Complex64>],
    rhs: &[Complex64],
    rtol: f64,
) -> Result<(DVector<f64>, LstsqReport), LstsqError> {
    let cols = rows.first().map_or(0, |r| r.len());
    let n = rows.len();
    let mut a = DMatrix::<f64>::zeros(2 * n, cols);
    let mut b = DVector::<f64>::zeros(2 * n);
    for (k, (row, r)) in rows.iter().zip(rhs).enumerate() {
        for (j, v) in row.iter().enumerate() {
            a[(2 * k, j)] = v.re;
            a[(2 * k + 1, j)] = v.im;
        }
        b[2 * k] = r.re;
        b[2 * k + 1] = r.im;
    }
    solve(&a, &b, rtol)
}
