//! Uniform-grid helpers: Lagrange stencils, cumulative quadrature and
//! one-sided differences.

use num_complex::Complex64;
use std::ops::{Add, Mul};

/// Uniform grid `x_i = i * step` on `[0, length]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid {
    pub length: f64,
    pub points: usize,
}

impl UniformGrid {
    pub fn new(length: f64, points: usize) -> Self {
        assert!(points >= 2, "grid needs at least two points");
        Self { length, points }
    }

    pub fn step(&self) -> f64 {
        self.length / (self.points - 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        if i + 1 == self.points {
            self.length
        } else {
            i as f64 * self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.x(i)).collect()
    }

    /// Index of the interval containing `x` (clamped to the last interval).
    pub fn interval_of(&self, x: f64) -> usize {
        let i = (x / self.step()).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.points - 2)
        }
    }
}

/// Monomial coefficients of the Lagrange basis on `nodes`:
/// `basis[r][j]` is the coefficient of `s^j` in `l_r(s)`.
pub fn lagrange_monomials(nodes: &[f64]) -> Vec<Vec<f64>> {
    let n = nodes.len();
    (0..n)
        .map(|r| {
            let mut poly = vec![1.0];
            let mut denom = 1.0;
            for (m, &xm) in nodes.iter().enumerate() {
                if m == r {
                    continue;
                }
                // poly *= (s - xm)
                let mut next = vec![0.0; poly.len() + 1];
                for (j, &c) in poly.iter().enumerate() {
                    next[j + 1] += c;
                    next[j] -= c * xm;
                }
                poly = next;
                denom *= nodes[r] - xm;
            }
            poly.iter().map(|c| c / denom).collect()
        })
        .collect()
}

const WIDTH: usize = 6;

/// Six-point interpolation rules for every stencil offset, in unit spacing
/// with the integration interval mapped to `s in [0, 1]`.
struct PanelRules {
    // basis[o][r][j] for stencil nodes s = -o, ..., -o + 5
    basis: Vec<Vec<Vec<f64>>>,
    // plain weights: integral over [0,1] of each basis polynomial
    plain: Vec<[f64; WIDTH]>,
}

impl PanelRules {
    fn new() -> Self {
        let mut basis = Vec::with_capacity(WIDTH);
        let mut plain = Vec::with_capacity(WIDTH);
        for o in 0..WIDTH {
            let nodes: Vec<f64> = (0..WIDTH).map(|r| r as f64 - o as f64).collect();
            let b = lagrange_monomials(&nodes);
            let mut w = [0.0; WIDTH];
            for r in 0..WIDTH {
                w[r] = b[r]
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c / (j + 1) as f64)
                    .sum();
            }
            basis.push(b);
            plain.push(w);
        }
        Self { basis, plain }
    }
}

fn panel_start(i: usize, points: usize) -> usize {
    // interval [i, i+1] uses nodes i-2 ..= i+3 when available
    i.saturating_sub(2).min(points - WIDTH)
}

/// Cumulative integral `F_i = int_0^{x_i} v(t) dt` with six-point local
/// interpolation on every interval.
pub fn cumulative_integral<T>(values: &[T], step: f64) -> Vec<T>
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T> + Default,
{
    let n = values.len();
    assert!(n >= WIDTH, "cumulative quadrature needs at least {WIDTH} points");
    let rules = PanelRules::new();
    let mut out = vec![T::default(); n];
    for i in 0..n - 1 {
        let start = panel_start(i, n);
        let w = &rules.plain[i - start];
        let mut acc = T::default();
        for r in 0..WIDTH {
            acc = acc + values[start + r] * w[r];
        }
        out[i + 1] = out[i] + acc * step;
    }
    out
}

/// Scaled weighted cumulative integral
/// `J_i = x_i^{-(k+1)} * int_0^{x_i} t^k p(t) dt`,
/// with `J_0 = p(0) / (k+1)`.
///
/// The polynomial interpolant of `p` on each interval is integrated exactly
/// against the monomial weight, so the result stays accurate as `x -> 0`
/// where `t^k` is not resolved by the grid.
pub fn scaled_moment_cumulative(p: &[Complex64], k: usize) -> Vec<Complex64> {
    let n = p.len();
    assert!(n >= WIDTH, "cumulative quadrature needs at least {WIDTH} points");
    let rules = PanelRules::new();
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[0] = p[0] / (k + 1) as f64;
    let mut binom = vec![0.0; k + 1];
    let mut moments = [0.0; WIDTH];
    for i in 0..n - 1 {
        // weight (t / x_{i+1})^k = (u + v s)^k with u = i/(i+1), v = 1/(i+1)
        let ip1 = (i + 1) as f64;
        if i == 0 {
            binom.iter_mut().for_each(|b| *b = 0.0);
            binom[k] = 1.0;
        } else {
            let u = i as f64 / ip1;
            let ratio = 1.0 / i as f64; // v / u
            binom[0] = u.powi(k as i32);
            for l in 0..k {
                binom[l + 1] = binom[l] * (k - l) as f64 / (l + 1) as f64 * ratio;
            }
        }
        for (j, m) in moments.iter_mut().enumerate() {
            *m = binom
                .iter()
                .enumerate()
                .map(|(l, b)| b / (l + j + 1) as f64)
                .sum();
        }
        let start = panel_start(i, n);
        let basis = &rules.basis[i - start];
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..WIDTH {
            let w: f64 = basis[r].iter().zip(moments.iter()).map(|(c, m)| c * m).sum();
            acc += p[start + r] * w;
        }
        // J_{i+1} = J_i (x_i/x_{i+1})^{k+1} + (1/(i+1)) * panel
        let shrink = (i as f64 / ip1).powi(k as i32 + 1);
        out[i + 1] = out[i] * shrink + acc / ip1;
    }
    out
}

/// Six-point Lagrange interpolation weights at `x`: returns the first node
/// index and the weights of nodes `start ..= start + 5`.
pub fn interpolation_weights(grid: &UniformGrid, x: f64) -> (usize, [f64; WIDTH]) {
    assert!(grid.points >= WIDTH, "interpolation needs at least {WIDTH} points");
    let i = grid.interval_of(x);
    let start = panel_start(i, grid.points);
    let s = x / grid.step() - start as f64;
    let mut w = [0.0; WIDTH];
    for (r, wr) in w.iter_mut().enumerate() {
        let mut v = 1.0;
        for m in 0..WIDTH {
            if m != r {
                v *= (s - m as f64) / (r as f64 - m as f64);
            }
        }
        *wr = v;
    }
    (start, w)
}

/// Five-point one-sided first derivative at the first node.
pub fn derivative_at_start(values: &[Complex64], step: f64) -> Complex64 {
    (-25.0 * values[0] + 48.0 * values[1] - 36.0 * values[2] + 16.0 * values[3]
        - 3.0 * values[4])
        / (12.0 * step)
}

/// Degree-five extrapolation to node 0 from nodes 1..=6.
pub fn extrapolate_to_start(values: &[Complex64]) -> Complex64 {
    6.0 * values[1] - 15.0 * values[2] + 20.0 * values[3] - 15.0 * values[4]
        + 6.0 * values[5]
        - values[6]
}
