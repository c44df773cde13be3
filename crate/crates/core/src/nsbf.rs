//! Neumann series of Bessel functions (NSBF) for the edge equation
//! `-y'' + q y = rho^2 y`.
//!
//! Two coefficient families live here:
//! - real endpoint vectors `g_n, s_n, t_n` used by the inverse solver
//!   ([`phi_series`], [`s_series`], [`t_series`]);
//! - complex coefficient grids `beta_n, xi_n` produced by the recurrent
//!   integration procedure from a nonvanishing solution `f` of
//!   `f'' = q f`, `f(0) = 1` ([`coefficients_from_f`]).
//!
//! The recurrence is carried out on rescaled integrals
//! `eta_n = x^{n-1} eta^_n`, `theta_n = x^n theta^_n`, which absorbs every
//! `x^{-n}` factor analytically. Only the `1/x` term of `xi_n` remains; at
//! `x = 0` it is extrapolated, and there it always multiplies `j_k(0) = 0`.

use crate::bessel::fill_sequence;
use crate::chebyshev::ChebyshevSeries;
use crate::ode::Propagator;
use crate::stencil::{
    cumulative_integral, extrapolate_to_start, interpolation_weights, scaled_moment_cumulative,
    UniformGrid,
};
use num_complex::Complex64;
use thiserror::Error;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NsbfError {
    #[error("nonvanishing solution has |f| = {min_abs:e} at x = {x}")]
    VanishingF { x: f64, min_abs: f64 },
    #[error("x = {x} lies outside [0, {length}]")]
    XOutOfRange { x: f64, length: f64 },
    #[error("series order {order} exceeds the Bessel table")]
    OrderTooLarge { order: usize },
    #[error("grids disagree in length")]
    GridMismatch,
    #[error("g0 + 1 = {value:e} at x = {x}")]
    DenominatorNearZero { x: f64, value: f64 },
    #[error("polynomial fit of g0 failed: {0}")]
    Fit(#[from] crate::lstsq::LstsqError),
}

/// `j_k(z) / z` for odd `k`, continuous at `z = 0`.
fn odd_over_z(k: usize, z: Complex64, jk: Complex64) -> Complex64 {
    if z == ZERO {
        if k == 1 {
            Complex64::new(1.0 / 3.0, 0.0)
        } else {
            ZERO
        }
    } else {
        jk / z
    }
}

fn bessel_buffer(count: usize, z: Complex64) -> Vec<Complex64> {
    let mut j = vec![ZERO; count];
    fill_sequence(z, &mut j);
    j
}

/// `phi_N(rho, x) = cos(rho x) + sum (-1)^n g_n j_{2n}(rho x)`.
pub fn phi_series(g: &[f64], rho: Complex64, x: f64) -> Complex64 {
    let z = rho * x;
    let j = bessel_buffer(2 * g.len().max(1), z);
    let mut acc = z.cos();
    for (n, &gn) in g.iter().enumerate() {
        acc += sign(n) * gn * j[2 * n];
    }
    acc
}

/// `S_N(rho, x) = sin(rho x)/rho + (1/rho) sum (-1)^n s_n j_{2n+1}(rho x)`.
pub fn s_series(s: &[f64], rho: Complex64, x: f64) -> Complex64 {
    odd_series(s, rho, x)
}

/// `T_N(rho, x) = sin(rho (x-L))/rho + (1/rho) sum (-1)^n t_n j_{2n+1}(rho (x-L))`.
pub fn t_series(t: &[f64], rho: Complex64, x: f64, length: f64) -> Complex64 {
    odd_series(t, rho, x - length)
}

fn odd_series(c: &[f64], rho: Complex64, x: f64) -> Complex64 {
    let z = rho * x;
    let j = bessel_buffer(2 * c.len() + 2, z);
    let mut acc = x * crate::bessel::sinc(z);
    for (n, &cn) in c.iter().enumerate() {
        let k = 2 * n + 1;
        acc += sign(n) * cn * x * odd_over_z(k, z, j[k]);
    }
    acc
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Nonvanishing solution of `f'' = q f` on a uniform grid, normalised to
/// `f(0) = 1`.
#[derive(Debug, Clone)]
pub struct RecurrenceState {
    pub grid: UniformGrid,
    pub f: Vec<Complex64>,
    pub df: Vec<Complex64>,
    /// `f'(0)`
    pub h: Complex64,
    /// `Q(x) = int_0^x q`
    pub q_integral: Vec<f64>,
}

impl RecurrenceState {
    pub fn new(
        grid: UniformGrid,
        f: Vec<Complex64>,
        df: Vec<Complex64>,
        q: &[f64],
    ) -> Result<Self, NsbfError> {
        if f.len() != grid.points || df.len() != grid.points || q.len() != grid.points {
            return Err(NsbfError::GridMismatch);
        }
        let (imin, min_abs) = f
            .iter()
            .enumerate()
            .map(|(i, v)| (i, v.norm()))
            .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a });
        if !(min_abs > 1e-10) {
            return Err(NsbfError::VanishingF {
                x: grid.x(imin),
                min_abs,
            });
        }
        // any nonzero multiple of a solution works; the recurrence needs f(0) = 1
        let scale = 1.0 / f[0];
        let f: Vec<Complex64> = f.into_iter().map(|v| v * scale).collect();
        let df: Vec<Complex64> = df.into_iter().map(|v| v * scale).collect();
        let h = df[0];
        let q_integral = cumulative_integral(q, grid.step());
        Ok(Self {
            grid,
            f,
            df,
            h,
            q_integral,
        })
    }
}

/// Builds `f = phi0 + i T0`, or `f = phi0 + i psi` with `psi` the solution
/// `psi(0) = 0, psi'(0) = 1` when `phi0(L)` is numerically zero.
///
/// `phi0` solves `y'' = q y` with `y(0) = 1, y'(0) = 0`; `t0` solves it with
/// `y(L) = 0, y'(L) = 1`.
pub fn build_nonvanishing_f(
    grid: UniformGrid,
    phi0: &[f64],
    dphi0: &[f64],
    t0: &[f64],
    dt0: &[f64],
    q: &[f64],
) -> Result<RecurrenceState, NsbfError> {
    let n = grid.points;
    if [phi0.len(), dphi0.len(), t0.len(), dt0.len(), q.len()]
        .iter()
        .any(|&l| l != n)
    {
        return Err(NsbfError::GridMismatch);
    }
    let peak = phi0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (second, dsecond): (Vec<f64>, Vec<f64>) = if phi0[n - 1].abs() < 1e-8 * (1.0 + peak) {
        // Abel's second solution phi0 * int dt / phi0^2 is exactly psi
        let traj = Propagator::new(q, grid.length).trajectory(ZERO, [ZERO, ONE]);
        traj.iter().map(|s| (s[0].re, s[1].re)).unzip()
    } else {
        (t0.to_vec(), dt0.to_vec())
    };
    let f = phi0
        .iter()
        .zip(&second)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    let df = dphi0
        .iter()
        .zip(&dsecond)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect();
    RecurrenceState::new(grid, f, df, q)
}

/// Which solution to evaluate from a [`NsbfCoefficients`] set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    Phi,
    S,
    PhiPrime,
    SPrime,
}

/// Values of `phi, S, phi', S'` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fundamental {
    pub phi: Complex64,
    pub s: Complex64,
    pub dphi: Complex64,
    pub ds: Complex64,
}

impl Fundamental {
    pub fn wronskian(&self) -> Complex64 {
        self.phi * self.ds - self.dphi * self.s
    }
}

/// Complex NSBF coefficient grids for `phi_h` (even `beta`), `S` (odd
/// `beta`) and their derivatives (`xi`), truncated at order `N`.
#[derive(Debug, Clone)]
pub struct NsbfCoefficients {
    pub grid: UniformGrid,
    pub order: usize,
    pub h: Complex64,
    /// `beta[n][i]` for `n = 0 ..= 2N+1`
    pub beta: Vec<Vec<Complex64>>,
    pub xi: Vec<Vec<Complex64>>,
    pub q_integral: Vec<f64>,
}

/// Runs the recurrent integration procedure up to `beta_{2N+1}, xi_{2N+1}`.
pub fn coefficients_from_f(state: &RecurrenceState, order: usize) -> Result<NsbfCoefficients, NsbfError> {
    let top = 2 * order + 1;
    if top > crate::bessel::MAX_ORDER {
        return Err(NsbfError::OrderTooLarge { order });
    }
    let grid = state.grid;
    let pts = grid.points;
    let nodes = grid.nodes();
    let f = &state.f;
    let df = &state.df;
    let quarter_q: Vec<Complex64> = state
        .q_integral
        .iter()
        .map(|&v| Complex64::new(0.25 * v, 0.0))
        .collect();

    // index n + 1 holds order n, starting at n = -1
    let mut beta: Vec<Vec<Complex64>> = Vec::with_capacity(top + 2);
    let mut xi: Vec<Vec<Complex64>> = Vec::with_capacity(top + 2);
    beta.push(vec![Complex64::new(0.5, 0.0); pts]);
    xi.push(quarter_q.clone());
    beta.push(f.iter().map(|v| (v - 1.0) * 0.5).collect());
    xi.push(
        df.iter()
            .zip(&quarter_q)
            .map(|(d, qq)| (d - state.h) * 0.5 - qq)
            .collect(),
    );

    for n in 1..=top {
        let prev_beta = &beta[n - 1];
        let prev_xi = &xi[n - 1];
        let cn = if n == 1 { 1.0 } else { 2.0 * (2 * n - 1) as f64 };
        let ratio = (2 * n + 1) as f64 / (2.0 * n as f64 - 3.0);
        let eta_hat: Vec<Complex64> = if n == 1 {
            f.iter().map(|v| (v - 1.0) * 0.5).collect()
        } else {
            let p: Vec<Complex64> = (0..pts)
                .map(|i| (nodes[i] * df[i] + (n - 1) as f64 * f[i]) * prev_beta[i])
                .collect();
            scaled_moment_cumulative(&p, n - 2)
        };
        let r: Vec<Complex64> = (0..pts)
            .map(|i| (eta_hat[i] - f[i] * prev_beta[i]) / (f[i] * f[i]))
            .collect();
        let theta_hat = scaled_moment_cumulative(&r, n - 1);

        let b: Vec<Complex64> = (0..pts)
            .map(|i| ratio * (prev_beta[i] + cn * f[i] * theta_hat[i]))
            .collect();
        let shift = cn - (2 * n) as f64 + 1.0;
        let mut x_part: Vec<Complex64> = (0..pts)
            .map(|i| {
                if i == 0 {
                    ZERO
                } else {
                    (cn * eta_hat[i] / f[i] - shift * prev_beta[i]) / nodes[i]
                }
            })
            .collect();
        x_part[0] = extrapolate_to_start(&x_part);
        let c: Vec<Complex64> = (0..pts)
            .map(|i| ratio * (prev_xi[i] + cn * df[i] * theta_hat[i] + x_part[i]))
            .collect();
        beta.push(b);
        xi.push(c);
    }
    beta.remove(0);
    xi.remove(0);
    Ok(NsbfCoefficients {
        grid,
        order,
        h: state.h,
        beta,
        xi,
        q_integral: state.q_integral.clone(),
    })
}

impl NsbfCoefficients {
    fn check_x(&self, x: f64) -> Result<(), NsbfError> {
        let length = self.grid.length;
        if !(x >= 0.0 && x <= length * (1.0 + 1e-12)) {
            return Err(NsbfError::XOutOfRange { x, length });
        }
        Ok(())
    }

    /// Coefficients and `Q` at an arbitrary point by six-point interpolation.
    fn at(&self, x: f64) -> (Vec<Complex64>, Vec<Complex64>, f64) {
        let x = x.min(self.grid.length);
        let node = x / self.grid.step();
        let nearest = node.round();
        if (node - nearest).abs() < 1e-9 {
            let i = (nearest as usize).min(self.grid.points - 1);
            return (
                self.beta.iter().map(|b| b[i]).collect(),
                self.xi.iter().map(|c| c[i]).collect(),
                self.q_integral[i],
            );
        }
        let (start, w) = interpolation_weights(&self.grid, x);
        let interp = |v: &Vec<Complex64>| -> Complex64 {
            (0..6).map(|r| v[start + r] * w[r]).sum()
        };
        let q: f64 = (0..6).map(|r| self.q_integral[start + r] * w[r]).sum();
        (
            self.beta.iter().map(interp).collect(),
            self.xi.iter().map(interp).collect(),
            q,
        )
    }

    /// `phi, S, phi', S'` at `(rho, x)` with `phi = phi_h - h S`.
    pub fn fundamental(&self, rho: Complex64, x: f64) -> Result<Fundamental, NsbfError> {
        self.check_x(x)?;
        let (beta, xi, q_int) = self.at(x);
        let z = rho * x;
        let j = bessel_buffer(beta.len(), z);
        let (sin, cos) = (z.sin(), z.cos());
        let half_q = 0.5 * q_int;

        let mut phi_h = cos;
        let mut dphi_h = -rho * sin + cos * (half_q + self.h);
        // S and S' carry an overall 1/rho, folded into x * j(z) / z
        let mut s = x * crate::bessel::sinc(z);
        let mut ds = cos + half_q * s;
        for n in 0..=self.order {
            let sg = 2.0 * sign(n);
            let (ke, ko) = (2 * n, 2 * n + 1);
            phi_h += sg * beta[ke] * j[ke];
            dphi_h += sg * xi[ke] * j[ke];
            let odd = x * odd_over_z(ko, z, j[ko]);
            s += sg * beta[ko] * odd;
            ds += sg * xi[ko] * odd;
        }
        Ok(Fundamental {
            phi: phi_h - self.h * s,
            s,
            dphi: dphi_h - self.h * ds,
            ds,
        })
    }

    pub fn eval(&self, which: Which, rho: Complex64, x: f64) -> Result<Complex64, NsbfError> {
        let v = self.fundamental(rho, x)?;
        Ok(match which {
            Which::Phi => v.phi,
            Which::S => v.s,
            Which::PhiPrime => v.dphi,
            Which::SPrime => v.ds,
        })
    }
}

/// Potential recovered from `g_0` via `q = g_0'' / (g_0 + 1)`, with `g_0`
/// replaced by a Chebyshev least-squares fit.
#[derive(Debug, Clone)]
pub struct RecoveredPotential {
    pub g0: ChebyshevSeries,
    pub g0_second: ChebyshevSeries,
}

impl RecoveredPotential {
    pub fn q(&self, x: f64) -> f64 {
        self.g0_second.eval(x) / (self.g0.eval(x) + 1.0)
    }
}

/// Fits `g0` sampled at `xs` (covering `[0, L]`) with a polynomial of the
/// given degree and differentiates it twice. The fit keeps
/// `g0(0) = g0'(0) = 0`, which `phi(0) = 1, phi'(0) = 0` imposes.
pub fn recover_q_from_g0(
    xs: &[f64],
    g0: &[f64],
    length: f64,
    degree: usize,
) -> Result<RecoveredPotential, NsbfError> {
    if let Some((x, v)) = xs
        .iter()
        .zip(g0)
        .map(|(&x, &g)| (x, g + 1.0))
        .find(|(_, v)| v.abs() < 1e-6)
    {
        return Err(NsbfError::DenominatorNearZero { x, value: v });
    }
    let fit = ChebyshevSeries::fit_with_root_at_start(xs, g0, degree, 0.0, length, 2)?;
    let g0_second = fit.derivative().derivative();
    Ok(RecoveredPotential { g0: fit, g0_second })
}
