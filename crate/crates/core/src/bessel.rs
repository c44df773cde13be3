//! Spherical Bessel functions of the first kind for complex argument.
//!
//! Whole sequences `j_0(z) ..= j_n(z)` are produced at once because every
//! consumer (series evaluation, least-squares rows) needs all orders at the
//! same argument.
//!
//! Regimes:
//! - `z == 0`: exact values `j_0 = 1`, `j_k = 0`.
//! - `|z| < 1`: Maclaurin series per order.
//! - `|z| > max_order`: upward recurrence from the closed forms of `j_0, j_1`.
//! - otherwise: Miller backward recurrence normalized by `j_0` or `j_1`.

use num_complex::Complex64;
use thiserror::Error;

/// Largest order accepted by the public entry points.
pub const MAX_ORDER: usize = 128;

const SERIES_RADIUS: f64 = 1.0;
// keeps |value|^2 finite inside complex division
const RESCALE_LIMIT: f64 = 1.0e100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BesselError {
    #[error("spherical Bessel order {order} exceeds supported maximum {max}")]
    OrderTooLarge { order: usize, max: usize },
}

/// `j_order(z)`.
pub fn sph_bessel_j(order: usize, z: Complex64) -> Result<Complex64, BesselError> {
    Ok(sph_bessel_j_seq(order, z)?[order])
}

/// `[j_0(z), ..., j_max_order(z)]`.
pub fn sph_bessel_j_seq(max_order: usize, z: Complex64) -> Result<Vec<Complex64>, BesselError> {
    if max_order > MAX_ORDER {
        return Err(BesselError::OrderTooLarge {
            order: max_order,
            max: MAX_ORDER,
        });
    }
    let mut out = vec![Complex64::new(0.0, 0.0); max_order + 1];
    fill_sequence(z, &mut out);
    Ok(out)
}

/// Fills `out[k] = j_k(z)` for `k < out.len()`. Callers are responsible for
/// keeping `out.len() - 1 <= MAX_ORDER`; larger buffers still work but are
/// outside the tested accuracy envelope.
pub fn fill_sequence(z: Complex64, out: &mut [Complex64]) {
    if out.is_empty() {
        return;
    }
    let max_order = out.len() - 1;
    let r = z.norm();
    if r == 0.0 {
        out.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        out[0] = Complex64::new(1.0, 0.0);
        return;
    }
    if r < SERIES_RADIUS {
        maclaurin_sequence(z, out);
    } else if r > max_order as f64 {
        upward_sequence(z, out);
    } else {
        miller_sequence(z, out);
    }
}

/// `sin(z)/z` with the removable point handled.
pub fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1.0e-4 {
        let z2 = z * z;
        Complex64::new(1.0, 0.0) - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

fn maclaurin_sequence(z: Complex64, out: &mut [Complex64]) {
    let half_z2 = -0.5 * z * z;
    // z^n / (2n+1)!!
    let mut lead = Complex64::new(1.0, 0.0);
    for (n, slot) in out.iter_mut().enumerate() {
        if n > 0 {
            lead *= z / (2 * n + 1) as f64;
        }
        let mut term = lead;
        let mut sum = term;
        let mut k = 0usize;
        loop {
            term *= half_z2 / ((k + 1) as f64 * (2 * n + 2 * k + 3) as f64);
            sum += term;
            k += 1;
            if term.norm() <= 1.0e-17 * sum.norm() || k > 60 {
                break;
            }
        }
        *slot = sum;
    }
}

fn closed_j0_j1(z: Complex64) -> (Complex64, Complex64) {
    let s = z.sin();
    let c = z.cos();
    let j0 = s / z;
    let j1 = (j0 - c) / z;
    (j0, j1)
}

fn upward_sequence(z: Complex64, out: &mut [Complex64]) {
    let (j0, j1) = closed_j0_j1(z);
    out[0] = j0;
    if out.len() > 1 {
        out[1] = j1;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (2 * n + 1) as f64 / z * out[n] - out[n - 1];
    }
}

fn miller_sequence(z: Complex64, out: &mut [Complex64]) {
    let max_order = out.len() - 1;
    let top = (max_order as f64).max(z.norm());
    let start = top.ceil() as usize + (160.0 * top).sqrt().ceil() as usize + 20;

    let mut next = Complex64::new(0.0, 0.0); // f_{n+1}
    let mut cur = Complex64::new(1.0e-30, 0.0); // f_n
    // Walk n = start ..= 1, producing f_{n-1}.
    for n in (1..=start).rev() {
        if n <= max_order {
            out[n] = cur;
        }
        let prev = (2 * n + 1) as f64 / z * cur - next;
        next = cur;
        cur = prev;
        if cur.norm() > RESCALE_LIMIT {
            let s = 1.0 / cur.norm();
            cur *= s;
            next *= s;
            if n <= max_order {
                out[n..=max_order].iter_mut().for_each(|v| *v *= s);
            }
        }
    }
    out[0] = cur;

    let (j0, j1) = closed_j0_j1(z);
    let scale = if j0.norm() >= j1.norm() || max_order == 0 {
        j0 / out[0]
    } else {
        j1 / out[1]
    };
    out.iter_mut().for_each(|v| *v *= scale);
}
