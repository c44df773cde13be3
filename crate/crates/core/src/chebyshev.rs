//! Chebyshev least-squares fits on an interval with exact differentiation.

use crate::lstsq::{self, LstsqError};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevSeries {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<f64>,
}

impl ChebyshevSeries {
    fn to_unit(&self, x: f64) -> f64 {
        (2.0 * x - self.start - self.end) / (self.end - self.start)
    }

    /// Least-squares fit of degree `degree` to `(xs, ys)` on `[start, end]`.
    pub fn fit(xs: &[f64], ys: &[f64], degree: usize, start: f64, end: f64) -> Result<Self, LstsqError> {
        Self::fit_weighted(xs, ys, degree, start, end, 0)
    }

    /// Least-squares fit of degree `degree` with a zero of multiplicity
    /// `order` at `start`, i.e. `(x - start)^order` times a polynomial.
    pub fn fit_with_root_at_start(
        xs: &[f64],
        ys: &[f64],
        degree: usize,
        start: f64,
        end: f64,
        order: usize,
    ) -> Result<Self, LstsqError> {
        Self::fit_weighted(xs, ys, degree.saturating_sub(order), start, end, order)
    }

    fn fit_weighted(
        xs: &[f64],
        ys: &[f64],
        degree: usize,
        start: f64,
        end: f64,
        order: usize,
    ) -> Result<Self, LstsqError> {
        let mut shell = Self {
            start,
            end,
            coeffs: Vec::new(),
        };
        let mut a = DMatrix::<f64>::zeros(xs.len(), degree + 1);
        for (r, &x) in xs.iter().enumerate() {
            let t = shell.to_unit(x);
            let w = (x - start).powi(order as i32);
            let (mut prev, mut cur) = (1.0, t);
            a[(r, 0)] = w;
            if degree >= 1 {
                a[(r, 1)] = w * t;
            }
            for k in 2..=degree {
                let next = 2.0 * t * cur - prev;
                a[(r, k)] = w * next;
                prev = cur;
                cur = next;
            }
        }
        let (c, _) = lstsq::solve(&a, &DVector::from_column_slice(ys), 1e-14)?;
        shell.coeffs = c.iter().cloned().collect();
        for _ in 0..order {
            shell = shell.times_offset();
        }
        Ok(shell)
    }

    /// `(x - start)` times the series.
    fn times_offset(&self) -> Self {
        // x - start = h (t + 1) and t T_k = (T_{k+1} + T_{|k-1|}) / 2
        let h = 0.5 * (self.end - self.start);
        let n = self.coeffs.len();
        let mut out = vec![0.0; n + 1];
        for (k, &c) in self.coeffs.iter().enumerate() {
            out[k] += h * c;
            out[k + 1] += 0.5 * h * c;
            if k == 0 {
                out[1] += 0.5 * h * c;
            } else {
                out[k - 1] += 0.5 * h * c;
            }
        }
        Self {
            start: self.start,
            end: self.end,
            coeffs: out,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        // Clenshaw
        let t = self.to_unit(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * t * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs.first().copied().unwrap_or(0.0) + t * b1 - b2
    }

    pub fn derivative(&self) -> Self {
        let n = self.coeffs.len();
        let mut d = vec![0.0; n.saturating_sub(1).max(1)];
        if n >= 2 {
            // c'_{k-1} = c'_{k+1} + 2 k c_k
            let mut next2 = 0.0;
            let mut next1 = 0.0;
            for k in (1..n).rev() {
                let v = next2 + 2.0 * k as f64 * self.coeffs[k];
                d[k - 1] = v;
                next2 = next1;
                next1 = v;
            }
            d[0] *= 0.5;
        }
        let scale = 2.0 / (self.end - self.start);
        Self {
            start: self.start,
            end: self.end,
            coeffs: d.into_iter().map(|c| c * scale).collect(),
        }
    }
}
