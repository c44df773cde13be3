//! Local inverse problem on the leaf edges of a sheaf.
//!
//! Per leaf edge `e_i` (leaf at `x = 0`, abscission vertex at `x = L_i`):
//! 1. endpoint coefficients `g_n(L), s_n(L)` from the Weyl samples;
//! 2. Dirichlet-Dirichlet roots `mu_k` (zeros of `S_N(rho, L)`) and
//!    Neumann-Dirichlet roots `nu_k` (zeros of `phi_N(rho, L)`);
//! 3. `t_n(0)` from `T(mu_k, 0) = 0`, multipliers `1/beta_k = T_N(nu_k, 0)`;
//! 4. `g_0(x), t_0(x)` from `phi(nu_k, x) = beta_k T(nu_k, x)` at interior
//!    points, then `q = g_0'' / (g_0 + 1)`;
//! 5. `phi, S, phi', S'` at `x = L` for peeling.
//!
//! Roots are stored as `rho` values: positive reals, or `i tau` for a
//! negative eigenvalue `-tau^2`.

use crate::bessel::fill_sequence;
use crate::chebyshev::ChebyshevSeries;
use crate::lstsq::{self, LstsqError, LstsqReport};
use crate::nsbf::{
    build_nonvanishing_f, coefficients_from_f, phi_series, recover_q_from_g0, s_series, t_series,
    Fundamental, NsbfError, RecoveredPotential,
};
use crate::stencil::UniformGrid;
use crate::weyl::WeylSamples;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InverseError {
    #[error("{have} Weyl samples, at least {need} required")]
    InsufficientSamples { have: usize, need: usize },
    #[error("{stage}: {source}")]
    RankDeficient {
        stage: &'static str,
        source: LstsqError,
    },
    #[error("found {found} {spectrum} roots below rho = {rho_max}, wanted {wanted}")]
    RootCountShort {
        spectrum: &'static str,
        found: usize,
        wanted: usize,
        rho_max: f64,
    },
    #[error("multiplier {k}: |1/beta| = {value:e}")]
    DegenerateMultiplier { k: usize, value: f64 },
    #[error("interior point x = {x}: {source}")]
    InteriorPoint { x: f64, source: LstsqError },
    #[error(transparent)]
    Nsbf(#[from] NsbfError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Type2 {
    None,
    All,
}

impl std::str::FromStr for Type2 {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "all" => Ok(Self::All),
            other => Err(format!("expected `none` or `all`, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    /// Endpoint truncation order.
    pub n: usize,
    /// Interior truncation order.
    pub n_c: usize,
    pub k_d: usize,
    pub k_n: usize,
    /// Interior points where `g_0, t_0` are solved for.
    pub xm_points: usize,
    pub use_type2: Type2,
    pub rank_rtol: f64,
    /// Negative eigenvalues are searched for in `[-tau_max^2, 0)`.
    pub tau_max: f64,
    /// Grid used to rebuild the NSBF coefficients for peeling.
    pub dense_points: usize,
    /// Degree of the Chebyshev fit of `g_0`.
    pub fit_degree: usize,
    /// Peeling drops samples with `|phi_1 + M_11 S_1|` below this fraction
    /// of its median.
    pub drop_threshold: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 9,
            n_c: 9,
            k_d: 100,
            k_n: 100,
            xm_points: 200,
            use_type2: Type2::None,
            rank_rtol: 1e-12,
            tau_max: 10.0,
            dense_points: 2001,
            fit_degree: 24,
            drop_threshold: 1e-12,
        }
    }
}

impl SolverConfig {
    /// Samples needed to determine the endpoint coefficients on a sheaf of
    /// `m1` leaf edges.
    pub fn required_samples(&self, m1: usize) -> usize {
        let unknowns = self.n + 1;
        match (m1, self.use_type2) {
            (1, _) => 2 * unknowns,
            (_, Type2::None) | (2, Type2::All) => 3 * unknowns,
            (m, Type2::All) => ((m + 1) * unknowns).div_ceil(m - 1),
        }
    }
}

/// A leaf edge of the sheaf: its row/column in the Weyl matrix and length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SheafLeaf {
    pub column: usize,
    pub length: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EndpointCoefficients {
    pub g: Vec<f64>,
    pub s: Vec<f64>,
    /// `s_n(L_j)` of the other leaf edges that entered the system, keyed by
    /// position in the sheaf.
    pub s_other: Vec<(usize, Vec<f64>)>,
    pub report: LstsqReport,
}

fn sign(n: usize) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `(-1)^n j_{2n}(z)` and `(-1)^n j_{2n+1}(z)` for `n = 0..=order`.
fn alternating_bessel(order: usize, z: Complex64) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut j = vec![ZERO; 2 * order + 2];
    fill_sequence(z, &mut j);
    let even = (0..=order).map(|n| sign(n) * j[2 * n]).collect();
    let odd = (0..=order).map(|n| sign(n) * j[2 * n + 1]).collect();
    (even, odd)
}

fn normalise_row(row: &mut [Complex64], rhs: &mut Complex64) {
    let scale = row.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    if scale > 0.0 {
        row.iter_mut().for_each(|v| *v /= scale);
        *rhs /= scale;
    }
}

/// Endpoint coefficients of leaf edge `i` of the sheaf from the first-kind
/// equations (continuity of `w_i` at the abscission vertex against a
/// partner leaf edge) and optionally all second-kind equations.
///
/// Without second-kind equations every other sheaf edge is tried as the
/// partner and the smallest residual wins: a partner whose own series
/// converges slowly (a kinked potential, say) would otherwise leak its
/// truncation error into edge `i`. With them the partner is the next edge,
/// cyclically. A one-edge "sheaf" is an interval whose far end is a leaf.
pub fn solve_endpoint_coeffs(
    samples: &WeylSamples,
    sheaf: &[SheafLeaf],
    i: usize,
    cfg: &SolverConfig,
) -> Result<EndpointCoefficients, InverseError> {
    let m1 = sheaf.len();
    let need = cfg.required_samples(m1);
    if samples.len() < need {
        return Err(InverseError::InsufficientSamples {
            have: samples.len(),
            need,
        });
    }
    if m1 == 1 || cfg.use_type2 == Type2::All {
        return endpoint_system(samples, sheaf, i, (i + 1) % m1, cfg);
    }
    let mut best: Option<EndpointCoefficients> = None;
    for partner in (0..m1).filter(|&j| j != i) {
        let c = endpoint_system(samples, sheaf, i, partner, cfg)?;
        if best.as_ref().is_none_or(|b| c.report.residual < b.report.residual) {
            best = Some(c);
        }
    }
    Ok(best.expect("a sheaf of two or more edges has a partner"))
}

fn endpoint_system(
    samples: &WeylSamples,
    sheaf: &[SheafLeaf],
    i: usize,
    next: usize,
    cfg: &SolverConfig,
) -> Result<EndpointCoefficients, InverseError> {
    let m1 = sheaf.len();
    let order = cfg.n;
    let width = order + 1;
    // unknown blocks: g_i, then s_j for every listed sheaf position
    let s_blocks: Vec<usize> = match (m1, cfg.use_type2) {
        (1, _) => vec![i],
        (_, Type2::None) => vec![i, next],
        (_, Type2::All) => std::iter::once(i).chain((0..m1).filter(|&j| j != i)).collect(),
    };
    let cols = width * (1 + s_blocks.len());
    let block_of = |j: usize| 1 + s_blocks.iter().position(|&b| b == j).unwrap();

    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let li = sheaf[i].length;
    for (k, &rho) in samples.rhos.iter().enumerate() {
        let m = &samples.matrices[k];
        let mii = m[(sheaf[i].column, sheaf[i].column)];
        let (even_i, odd_i) = alternating_bessel(order, rho * li);
        let mut row = vec![ZERO; cols];
        for n in 0..width {
            row[n] = rho * even_i[n];
            row[width + n] = mii * odd_i[n];
        }
        let mut r = -rho * (rho * li).cos() - mii * (rho * li).sin();
        if m1 > 1 {
            let ln = sheaf[next].length;
            let mij = m[(sheaf[i].column, sheaf[next].column)];
            let (_, odd_n) = alternating_bessel(order, rho * ln);
            let off = block_of(next) * width;
            for n in 0..width {
                row[off + n] = -mij * odd_n[n];
            }
            r += mij * (rho * ln).sin();
        }
        normalise_row(&mut row, &mut r);
        rows.push(row);
        rhs.push(r);

        if cfg.use_type2 == Type2::All && m1 > 2 {
            for j in 0..m1 {
                let j1 = (j + 1) % m1;
                if j == i || j1 == i {
                    continue;
                }
                let (lj, lj1) = (sheaf[j].length, sheaf[j1].length);
                let mij = m[(sheaf[i].column, sheaf[j].column)];
                let mij1 = m[(sheaf[i].column, sheaf[j1].column)];
                let (_, odd_j) = alternating_bessel(order, rho * lj);
                let (_, odd_j1) = alternating_bessel(order, rho * lj1);
                let mut row = vec![ZERO; cols];
                let (oj, oj1) = (block_of(j) * width, block_of(j1) * width);
                for n in 0..width {
                    row[oj + n] += mij * odd_j[n];
                    row[oj1 + n] -= mij1 * odd_j1[n];
                }
                let mut r = mij1 * (rho * lj1).sin() - mij * (rho * lj).sin();
                normalise_row(&mut row, &mut r);
                rows.push(row);
                rhs.push(r);
            }
        }
    }
    let (x, report) = lstsq::solve_complex_rows(&rows, &rhs, cfg.rank_rtol).map_err(|source| {
        InverseError::RankDeficient {
            stage: "endpoint coefficients",
            source,
        }
    })?;
    let block = |b: usize| x.as_slice()[b * width..(b + 1) * width].to_vec();
    Ok(EndpointCoefficients {
        g: block(0),
        s: block(1),
        s_other: s_blocks
            .iter()
            .enumerate()
            .skip(1)
            .map(|(b, &j)| (j, block(b + 1)))
            .collect(),
        report,
    })
}

/// Roots of a real function on `(a, b]` bracketed on a uniform scan and
/// refined by bisection followed by a safeguarded secant iteration.
fn scan_roots(f: impl Fn(f64) -> f64, a: f64, b: f64, step: f64, mut out: impl FnMut(f64) -> bool) {
    let steps = ((b - a) / step).ceil() as usize;
    let mut x0 = a;
    let mut f0 = f(x0);
    for s in 1..=steps {
        let x1 = (a + s as f64 * step).min(b);
        let f1 = f(x1);
        if f1 == 0.0 {
            if !out(x1) {
                return;
            }
        } else if f0 != 0.0 && f0.signum() != f1.signum() && !out(refine_root(&f, x0, f0, x1, f1)) {
            return;
        }
        x0 = x1;
        f0 = f1;
    }
}

fn refine_root(f: &impl Fn(f64) -> f64, mut lo: f64, mut flo: f64, mut hi: f64, mut fhi: f64) -> f64 {
    while hi - lo > 1e-6 * (1.0 + hi.abs()) {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    let (mut xa, mut fa, mut xb, mut fb) = (lo, flo, hi, fhi);
    for _ in 0..30 {
        let mut x = xb - fb * (xb - xa) / (fb - fa);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
        } else {
            hi = x;
        }
        let done = (x - xb).abs() <= 4.0 * f64::EPSILON * x.abs();
        (xa, fa, xb, fb) = (xb, fb, x, fx);
        if done || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
            break;
        }
    }
    xb
}

/// The first `count` zeros of `rho -> F(rho)` where `F` is real on the real
/// and imaginary axes, as `rho` values ordered by `rho^2`.
fn spectrum(
    f: impl Fn(Complex64) -> Complex64 + Sync,
    length: f64,
    count: usize,
    cfg: &SolverConfig,
    name: &'static str,
) -> Result<Vec<Complex64>, InverseError> {
    let mut roots = Vec::new();
    // negative eigenvalues: rho = i tau, largest tau first
    let tau_step = (PI / (8.0 * length)).min(0.05);
    let mut neg = Vec::new();
    scan_roots(
        |t| f(Complex64::new(0.0, t)).re,
        1e-8,
        cfg.tau_max,
        tau_step,
        |t| {
            neg.push(t);
            true
        },
    );
    neg.sort_by(|a, b| b.total_cmp(a));
    roots.extend(neg.into_iter().map(|t| Complex64::new(0.0, t)));

    let step = PI / (8.0 * length);
    let mut lo = 1e-8;
    let mut hi = (count + 2) as f64 * PI / length;
    for _ in 0..=10 {
        scan_roots(|r| f(Complex64::new(r, 0.0)).re, lo, hi, step, |r| {
            roots.push(Complex64::new(r, 0.0));
            roots.len() < count
        });
        if roots.len() >= count {
            roots.truncate(count);
            return Ok(roots);
        }
        lo = hi;
        hi += PI / length;
    }
    Err(InverseError::RootCountShort {
        spectrum: name,
        found: roots.len(),
        wanted: count,
        rho_max: lo,
    })
}

/// Dirichlet-Dirichlet (`mu`) and Neumann-Dirichlet (`nu`) roots.
pub fn extract_spectra(
    g: &[f64],
    s: &[f64],
    length: f64,
    cfg: &SolverConfig,
) -> Result<(Vec<Complex64>, Vec<Complex64>), InverseError> {
    let mu = spectrum(|r| s_series(s, r, length), length, cfg.k_d, cfg, "Dirichlet-Dirichlet")?;
    let nu = spectrum(|r| phi_series(g, r, length), length, cfg.k_n, cfg, "Neumann-Dirichlet")?;
    Ok((mu, nu))
}

/// `t_n(0)` from `sum (-1)^n t_n(0) j_{2n+1}(mu_k L) = -sin(mu_k L)`.
pub fn solve_t0(
    mu: &[Complex64],
    length: f64,
    order: usize,
    rtol: f64,
) -> Result<(Vec<f64>, LstsqReport), InverseError> {
    let mut rows = Vec::with_capacity(mu.len());
    let mut rhs = Vec::with_capacity(mu.len());
    for &m in mu {
        let (_, mut odd) = alternating_bessel(order, m * length);
        let mut r = -(m * length).sin();
        normalise_row(&mut odd, &mut r);
        rows.push(odd);
        rhs.push(r);
    }
    let (x, report) = lstsq::solve_complex_rows(&rows, &rhs, rtol).map_err(|source| {
        InverseError::RankDeficient {
            stage: "t_n(0)",
            source,
        }
    })?;
    Ok((x.iter().copied().collect(), report))
}

/// `beta_k` with `1/beta_k = T_N(nu_k, 0)`.
pub fn multipliers(nu: &[Complex64], t0: &[f64], length: f64) -> Result<Vec<f64>, InverseError> {
    nu.iter()
        .enumerate()
        .map(|(k, &v)| {
            let inv = t_series(t0, v, 0.0, length).re;
            if inv.abs() < 1e-12 {
                Err(InverseError::DegenerateMultiplier { k, value: inv.abs() })
            } else {
                Ok(1.0 / inv)
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSpectraData {
    pub mu: Vec<Complex64>,
    pub nu: Vec<Complex64>,
    pub t0: Vec<f64>,
    pub beta: Vec<f64>,
    pub t0_report: LstsqReport,
}

impl TwoSpectraData {
    pub fn dirichlet_eigenvalues(&self) -> Vec<f64> {
        self.mu.iter().map(|m| (m * m).re).collect()
    }

    pub fn neumann_eigenvalues(&self) -> Vec<f64> {
        self.nu.iter().map(|m| (m * m).re).collect()
    }

    /// `nu_k^2 < mu_k^2 < nu_{k+1}^2` over the common range.
    pub fn interlaces(&self) -> bool {
        let (d, n) = (self.dirichlet_eigenvalues(), self.neumann_eigenvalues());
        (0..d.len().min(n.len())).all(|k| n[k] < d[k] && n.get(k + 1).is_none_or(|&nn| d[k] < nn))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteriorSolution {
    /// `0`, the interior points, `L`.
    pub xs: Vec<f64>,
    pub g0: Vec<f64>,
    pub t0: Vec<f64>,
    pub worst_condition: f64,
    pub worst_residual: f64,
}

/// Solves `phi(nu_k, x_m) = beta_k T(nu_k, x_m)` for `g_n(x_m), t_n(x_m)`,
/// `n <= N_c`, at `xm_points` uniform interior points. The endpoints take
/// `g_0(0) = 0, t_0(L) = 0` and the already known `g_0(L), t_0(0)`.
pub fn interior_solve(
    nu: &[Complex64],
    beta: &[f64],
    length: f64,
    endpoints: (f64, f64),
    cfg: &SolverConfig,
) -> Result<InteriorSolution, InverseError> {
    let nc = cfg.n_c;
    let pts = cfg.xm_points;
    let interior: Vec<f64> = (1..=pts).map(|m| length * m as f64 / (pts + 1) as f64).collect();
    let solved = interior
        .par_iter()
        .map(|&x| {
            let mut rows = Vec::with_capacity(nu.len());
            let mut rhs = Vec::with_capacity(nu.len());
            for (&v, &b) in nu.iter().zip(beta) {
                let (even, _) = alternating_bessel(nc, v * x);
                let (_, odd) = alternating_bessel(nc, v * (x - length));
                let ratio = b / v;
                let mut row: Vec<Complex64> = even.into_iter().chain(odd.into_iter().map(|o| -ratio * o)).collect();
                let mut r = ratio * (v * (x - length)).sin() - (v * x).cos();
                normalise_row(&mut row, &mut r);
                rows.push(row);
                rhs.push(r);
            }
            lstsq::solve_complex_rows(&rows, &rhs, cfg.rank_rtol)
                .map(|(sol, rep)| (sol[0], sol[nc + 1], rep))
                .map_err(|source| InverseError::InteriorPoint { x, source })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut xs = vec![0.0];
    xs.extend(&interior);
    xs.push(length);
    let mut g0 = vec![0.0];
    g0.extend(solved.iter().map(|s| s.0));
    g0.push(endpoints.0);
    let mut t0 = vec![endpoints.1];
    t0.extend(solved.iter().map(|s| s.1));
    t0.push(0.0);
    Ok(InteriorSolution {
        xs,
        g0,
        t0,
        worst_condition: solved.iter().map(|s| s.2.condition).fold(0.0, f64::max),
        worst_residual: solved.iter().map(|s| s.2.residual).fold(0.0, f64::max),
    })
}

/// Everything recovered on one leaf edge.
#[derive(Debug, Clone)]
pub struct EdgeRecovery {
    pub length: f64,
    pub endpoint: EndpointCoefficients,
    pub spectra: TwoSpectraData,
    pub interior: InteriorSolution,
    pub potential: RecoveredPotential,
    pub t0_fit: ChebyshevSeries,
}

impl EdgeRecovery {
    pub fn q(&self, x: f64) -> f64 {
        self.potential.q(x)
    }
}

/// Recovers the potential on leaf edge `i` of the sheaf.
pub fn recover_leaf_edge(
    samples: &WeylSamples,
    sheaf: &[SheafLeaf],
    i: usize,
    cfg: &SolverConfig,
) -> Result<EdgeRecovery, InverseError> {
    let length = sheaf[i].length;
    let endpoint = solve_endpoint_coeffs(samples, sheaf, i, cfg)?;
    let (mu, nu) = extract_spectra(&endpoint.g, &endpoint.s, length, cfg)?;
    let (t0, t0_report) = solve_t0(&mu, length, cfg.n, cfg.rank_rtol)?;
    let beta = multipliers(&nu, &t0, length)?;
    let interior = interior_solve(&nu, &beta, length, (endpoint.g[0], t0[0]), cfg)?;
    let potential = recover_q_from_g0(&interior.xs, &interior.g0, length, cfg.fit_degree)?;
    let t0_fit = ChebyshevSeries::fit(&interior.xs, &interior.t0, cfg.fit_degree, 0.0, length)
        .map_err(|source| InverseError::RankDeficient {
            stage: "t_0 fit",
            source,
        })?;
    Ok(EdgeRecovery {
        length,
        endpoint,
        spectra: TwoSpectraData {
            mu,
            nu,
            t0,
            beta,
            t0_report,
        },
        interior,
        potential,
        t0_fit,
    })
}

/// `phi, S, phi', S'` at `x = L` for every `rho`, rebuilt by the recurrent
/// integration procedure from `phi(0, x) = g_0 + 1` and
/// `T(0, x) = (x - L)(t_0 / 3 + 1)`.
pub fn endpoint_functions(
    rec: &EdgeRecovery,
    rhos: &[Complex64],
    cfg: &SolverConfig,
) -> Result<Vec<Fundamental>, InverseError> {
    let length = rec.length;
    let grid = UniformGrid::new(length, cfg.dense_points);
    let xs = grid.nodes();
    let g = &rec.potential.g0;
    let dg = g.derivative();
    let dt = rec.t0_fit.derivative();
    let phi0: Vec<f64> = xs.iter().map(|&x| g.eval(x) + 1.0).collect();
    let dphi0: Vec<f64> = xs.iter().map(|&x| dg.eval(x)).collect();
    let t0: Vec<f64> = xs
        .iter()
        .map(|&x| (x - length) * (rec.t0_fit.eval(x) / 3.0 + 1.0))
        .collect();
    let dt0: Vec<f64> = xs
        .iter()
        .map(|&x| rec.t0_fit.eval(x) / 3.0 + 1.0 + (x - length) * dt.eval(x) / 3.0)
        .collect();
    let q: Vec<f64> = xs.iter().map(|&x| rec.q(x)).collect();
    let state = build_nonvanishing_f(grid, &phi0, &dphi0, &t0, &dt0, &q)?;
    let coeffs = coefficients_from_f(&state, cfg.n)?;
    rhos.par_iter()
        .map(|&r| coeffs.fundamental(r, length).map_err(InverseError::from))
        .collect()
}
