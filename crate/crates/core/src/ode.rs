//! Initial-value solver for `-y'' + q y = lambda y` on one edge.
//!
//! `q` is replaced by its piecewise-cubic interpolant on the sample grid and
//! every substep is advanced by a Taylor series summed to machine precision,
//! so the only discretisation error is the interpolation error of `q`.

use crate::edge::EdgeData;
use crate::stencil::lagrange_monomials;
use num_complex::Complex64;

/// Largest `|lambda - q|^{1/2} * substep` allowed.
const SUBSTEP_PHASE: f64 = 0.5;
const MAX_TERMS: usize = 80;

/// `(y, y')`
pub type State = [Complex64; 2];

#[derive(Debug, Clone)]
pub struct Propagator {
    step: f64,
    length: f64,
    // cubic of interval i in s = x - x_i: c[0] + c[1] s + c[2] s^2 + c[3] s^3
    cubics: Vec<[f64; 4]>,
    q_bound: Vec<f64>,
}

impl Propagator {
    pub fn new(samples: &[f64], length: f64) -> Self {
        let n = samples.len();
        assert!(n >= 4, "cubic interpolation needs four samples");
        let step = length / (n - 1) as f64;
        let unit: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|o| {
                let nodes: Vec<f64> = (0..4).map(|r| r as f64 - o as f64).collect();
                lagrange_monomials(&nodes)
            })
            .collect();
        let mut cubics = Vec::with_capacity(n - 1);
        let mut q_bound = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            // nodes i-1 ..= i+2, clamped
            let start = i.saturating_sub(1).min(n - 4);
            let basis = &unit[i - start];
            let mut c = [0.0; 4];
            for r in 0..4 {
                for j in 0..4 {
                    c[j] += samples[start + r] * basis[r][j];
                }
            }
            let mut scale = 1.0;
            for cj in c.iter_mut() {
                *cj *= scale;
                scale /= step;
            }
            cubics.push(c);
            q_bound.push(samples[start..start + 4].iter().fold(0.0f64, |m, q| m.max(q.abs())));
        }
        Self {
            step,
            length,
            cubics,
            q_bound,
        }
    }

    pub fn for_edge(edge: &EdgeData) -> Self {
        Self::new(&edge.samples, edge.length)
    }

    pub fn intervals(&self) -> usize {
        self.cubics.len()
    }

    /// Interpolated potential.
    pub fn potential(&self, x: f64) -> f64 {
        let i = ((x / self.step).floor().max(0.0) as usize).min(self.intervals() - 1);
        let s = x - i as f64 * self.step;
        let c = &self.cubics[i];
        c[0] + s * (c[1] + s * (c[2] + s * c[3]))
    }

    /// Advances all `states` across interval `i`, left to right or right to
    /// left.
    fn cross(&self, i: usize, lambda: Complex64, forward: bool, states: &mut [State]) {
        let c = &self.cubics[i];
        let width = if i + 1 == self.intervals() {
            self.length - i as f64 * self.step
        } else {
            self.step
        };
        let freq = (lambda.norm() + 1.5 * self.q_bound[i]).sqrt();
        let parts = ((freq * width / SUBSTEP_PHASE).ceil() as usize).max(1);
        let delta = width / parts as f64;
        for p in 0..parts {
            let (s0, d) = if forward {
                (p as f64 * delta, delta)
            } else {
                (width - p as f64 * delta, -delta)
            };
            // cubic re-expanded about s0, scaled by powers of d
            let d0 = c[0] + s0 * (c[1] + s0 * (c[2] + s0 * c[3]));
            let d1 = c[1] + s0 * (2.0 * c[2] + 3.0 * s0 * c[3]);
            let d2 = c[2] + 3.0 * s0 * c[3];
            let d3 = c[3];
            let coef = [
                (Complex64::new(d0, 0.0) - lambda) * (d * d),
                Complex64::new(d1 * d * d * d, 0.0),
                Complex64::new(d2 * d.powi(4), 0.0),
                Complex64::new(d3 * d.powi(5), 0.0),
            ];
            for st in states.iter_mut() {
                *st = taylor_step(st, &coef, d);
            }
        }
    }

    /// Integrates from `x = 0` to `x = L`, returning the state at every node.
    pub fn trajectory(&self, lambda: Complex64, init: State) -> Vec<State> {
        let mut out = Vec::with_capacity(self.intervals() + 1);
        let mut st = [init];
        out.push(init);
        for i in 0..self.intervals() {
            self.cross(i, lambda, true, &mut st);
            out.push(st[0]);
        }
        out
    }

    /// Integrates from `x = L` down to `x = 0`; `out[i]` is the state at node
    /// `i`.
    pub fn trajectory_back(&self, lambda: Complex64, at_end: State) -> Vec<State> {
        let n = self.intervals();
        let mut out = vec![at_end; n + 1];
        let mut st = [at_end];
        for i in (0..n).rev() {
            self.cross(i, lambda, false, &mut st);
            out[i] = st[0];
        }
        out
    }

    /// States at `x = L` for the given initial states at `x = 0`.
    pub fn shoot(&self, lambda: Complex64, states: &mut [State]) {
        for i in 0..self.intervals() {
            self.cross(i, lambda, true, states);
        }
    }
}

/// One Taylor step for `y'' = r(s) y` where `coef[j] * (s/d)^j * d^{-2}`
/// spells out `r` over the substep.
fn taylor_step(st: &State, coef: &[Complex64; 4], d: f64) -> State {
    let mut b = [Complex64::new(0.0, 0.0); MAX_TERMS];
    b[0] = st[0];
    b[1] = st[1] * d;
    let mut y = b[0] + b[1];
    let mut dy = b[1];
    let scale = b[0].norm().max(b[1].norm());
    let mut quiet = 0;
    for k in 0..MAX_TERMS - 2 {
        let mut acc = coef[0] * b[k];
        for j in 1..4 {
            if k >= j {
                acc += coef[j] * b[k - j];
            }
        }
        let next = acc / ((k + 1) * (k + 2)) as f64;
        b[k + 2] = next;
        y += next;
        dy += next * (k + 2) as f64;
        if next.norm() <= 1e-18 * scale.max(y.norm()) {
            quiet += 1;
            if quiet >= 4 {
                break;
            }
        } else {
            quiet = 0;
        }
    }
    [y, dy / d]
}

/// `phi, phi', S, S'` at `x = L` with `phi(0) = 1, phi'(0) = 0, S(0) = 0,
/// S'(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EndValues {
    pub phi: Complex64,
    pub dphi: Complex64,
    pub s: Complex64,
    pub ds: Complex64,
}

impl EndValues {
    pub fn wronskian(&self) -> Complex64 {
        self.phi * self.ds - self.dphi * self.s
    }
}

pub fn edge_fundamental(prop: &Propagator, rho: Complex64) -> EndValues {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut st = [[one, zero], [zero, one]];
    prop.shoot(rho * rho, &mut st);
    EndValues {
        phi: st[0][0],
        dphi: st[0][1],
        s: st[1][0],
        ds: st[1][1],
    }
}

/// Real solutions at `lambda = 0` on the sample grid: `phi` with
/// `phi(0) = 1, phi'(0) = 0` and `t` with `t(L) = 0, t'(L) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda0Solutions {
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub t: Vec<f64>,
    pub dt: Vec<f64>,
}

pub fn lambda0_solutions(edge: &EdgeData) -> Lambda0Solutions {
    let prop = Propagator::for_edge(edge);
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let fwd = prop.trajectory(zero, [one, zero]);
    let back = prop.trajectory_back(zero, [zero, one]);
    Lambda0Solutions {
        phi: fwd.iter().map(|s| s[0].re).collect(),
        dphi: fwd.iter().map(|s| s[1].re).collect(),
        t: back.iter().map(|s| s[0].re).collect(),
        dt: back.iter().map(|s| s[1].re).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn free_equation() {
        let p = Propagator::new(&vec![0.0; 101], 1.0);
        let rho = c(2.0, 0.1);
        let e = edge_fundamental(&p, rho);
        assert!((e.phi - rho.cos()).norm() < 1e-13);
        assert!((e.s - rho.sin() / rho).norm() < 1e-13);
        assert!((e.dphi + rho * rho.sin()).norm() < 1e-13);
        assert!((e.ds - rho.cos()).norm() < 1e-13);
    }

    #[test]
    fn constant_potential_high_frequency() {
        let p = Propagator::new(&vec![1.0; 65], 1.0);
        let rho = c(150.0, 0.7);
        let w = (rho * rho - 1.0).sqrt();
        let e = edge_fundamental(&p, rho);
        let rel = |a: Complex64, b: Complex64| (a - b).norm() / b.norm();
        assert!(rel(e.phi, w.cos()) < 1e-11);
        assert!(rel(e.s, w.sin() / w) < 1e-11);
        assert!((e.wronskian() - 1.0).norm() < 1e-10);
    }

    #[test]
    fn interpolant_reproduces_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.3 * x * x * x;
        let g: Vec<f64> = (0..11).map(|i| f(i as f64 * 0.2)).collect();
        let p = Propagator::new(&g, 2.0);
        for x in [0.0, 0.05, 0.77, 1.99, 2.0] {
            assert!((p.potential(x) - f(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn lambda0_constant() {
        let e = EdgeData::from_fn(0, 0, 1, 1.0, 101, |_| 1.0).unwrap();
        let s = lambda0_solutions(&e);
        for (i, x) in e.grid().nodes().into_iter().enumerate() {
            assert!((s.phi[i] - x.cosh()).abs() < 1e-13);
            assert!((s.t[i] - (x - 1.0).sinh()).abs() < 1e-13);
            assert!((s.dt[i] - (x - 1.0).cosh()).abs() < 1e-13);
        }
    }
}
