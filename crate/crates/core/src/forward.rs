//! Direct problem: Weyl matrix of a quantum tree at complex `rho`.
//!
//! On every edge `w = a phi + b S` in the edge's own coordinate. The `2P`
//! unknowns are fixed by the leaf values, continuity and the Kirchhoff
//! condition (sum of derivatives pointing away from the vertex vanishes).

use crate::edge::{EdgeData, EdgeDataError};
use crate::graph::{TreeGraph, VertexId};
use crate::ode::{edge_fundamental, EndValues, Propagator};
use crate::weyl::WeylSamples;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Debug, Error)]
pub enum ForwardError {
    #[error("vertex system is singular at rho = {rho}")]
    SingularSystem { rho: Complex64 },
    #[error("rho^2 = {lambda} is real")]
    RealSpectralParameter { lambda: Complex64 },
    #[error("edge {edge} has no potential data")]
    MissingEdge { edge: usize },
    #[error(transparent)]
    Edge(#[from] EdgeDataError),
}

/// Weyl matrix plus the coefficients `(a, b)` of every Weyl solution:
/// `coeffs[(2p, i)]`, `coeffs[(2p + 1, i)]` belong to edge position `p` and
/// source leaf `i`.
#[derive(Debug, Clone)]
pub struct WeylSolution {
    pub matrix: DMatrix<Complex64>,
    pub coeffs: DMatrix<Complex64>,
}

/// Solves the vertex system given `phi, S` and derivatives at `x = L` for
/// every edge (aligned with `graph.edges()`), with `x = 0` at `starts[p]`.
pub fn assemble_from_ends(
    graph: &TreeGraph,
    starts: &[VertexId],
    ends: &[EndValues],
    rho: Complex64,
) -> Result<WeylSolution, ForwardError> {
    let p_count = graph.edge_count();
    let n = 2 * p_count;
    let leaves = graph.leaves();
    let m = leaves.len();
    let mut a = DMatrix::<Complex64>::zeros(n, n);
    let mut rhs = DMatrix::<Complex64>::zeros(n, m);
    let mut row = 0;

    // value / away-derivative of edge p at vertex v as (coef of a, coef of b)
    let value_at = |p: usize, v: VertexId| -> (Complex64, Complex64) {
        if starts[p] == v {
            (ONE, ZERO)
        } else {
            (ends[p].phi, ends[p].s)
        }
    };
    let away_at = |p: usize, v: VertexId| -> (Complex64, Complex64) {
        if starts[p] == v {
            (ZERO, ONE)
        } else {
            (-ends[p].dphi, -ends[p].ds)
        }
    };

    for (li, &leaf) in leaves.iter().enumerate() {
        let e = graph.leaf_edge(leaf).expect("leaf has an edge");
        let p = graph.edge_position(e).expect("edge is registered");
        let (ca, cb) = value_at(p, leaf);
        a[(row, 2 * p)] = ca;
        a[(row, 2 * p + 1)] = cb;
        rhs[(row, li)] = ONE;
        row += 1;
    }
    for v in graph.internal_vertices() {
        let inc: Vec<usize> = graph
            .incident(v)
            .iter()
            .map(|&e| graph.edge_position(e).expect("edge is registered"))
            .collect();
        let (a0, b0) = value_at(inc[0], v);
        for &p in &inc[1..] {
            let (ca, cb) = value_at(p, v);
            a[(row, 2 * inc[0])] += a0;
            a[(row, 2 * inc[0] + 1)] += b0;
            a[(row, 2 * p)] -= ca;
            a[(row, 2 * p + 1)] -= cb;
            row += 1;
        }
        for &p in &inc {
            let (ca, cb) = away_at(p, v);
            a[(row, 2 * p)] += ca;
            a[(row, 2 * p + 1)] += cb;
        }
        row += 1;
    }
    debug_assert_eq!(row, n);

    let coeffs = a
        .lu()
        .solve(&rhs)
        .ok_or(ForwardError::SingularSystem { rho })?;
    if coeffs.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(ForwardError::SingularSystem { rho });
    }
    let mut matrix = DMatrix::<Complex64>::zeros(m, m);
    for (lj, &leaf) in leaves.iter().enumerate() {
        let e = graph.leaf_edge(leaf).expect("leaf has an edge");
        let p = graph.edge_position(e).expect("edge is registered");
        let (da, db) = away_at(p, leaf);
        for i in 0..m {
            matrix[(i, lj)] = da * coeffs[(2 * p, i)] + db * coeffs[(2 * p + 1, i)];
        }
    }
    Ok(WeylSolution { matrix, coeffs })
}

/// A tree with potentials, ready for repeated Weyl evaluations.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    graph: TreeGraph,
    edges: Vec<EdgeData>,
    props: Vec<Propagator>,
}

impl ForwardModel {
    /// `edges` may come in any order and orientation; they are matched to
    /// the graph by id and leaf edges are flipped to start at the leaf.
    pub fn new(graph: TreeGraph, edges: &[EdgeData]) -> Result<Self, ForwardError> {
        let mut aligned = Vec::with_capacity(graph.edge_count());
        for e in graph.edges() {
            let d = edges
                .iter()
                .find(|d| d.edge == e.id)
                .ok_or(ForwardError::MissingEdge { edge: e.id })?;
            aligned.push(d.normalized_for(&graph)?);
        }
        let props = aligned.iter().map(Propagator::for_edge).collect();
        Ok(Self {
            graph,
            edges: aligned,
            props,
        })
    }

    pub fn graph(&self) -> &TreeGraph {
        &self.graph
    }

    /// Edge data aligned with `graph().edges()`.
    pub fn edges(&self) -> &[EdgeData] {
        &self.edges
    }

    pub fn end_values(&self, rho: Complex64) -> Vec<EndValues> {
        self.props.iter().map(|p| edge_fundamental(p, rho)).collect()
    }

    pub fn solve(&self, rho: Complex64) -> Result<WeylSolution, ForwardError> {
        let lambda = rho * rho;
        if lambda.im == 0.0 {
            return Err(ForwardError::RealSpectralParameter { lambda });
        }
        let starts: Vec<VertexId> = self.edges.iter().map(|e| e.start).collect();
        assemble_from_ends(&self.graph, &starts, &self.end_values(rho), rho)
    }

    pub fn weyl(&self, rho: Complex64) -> Result<DMatrix<Complex64>, ForwardError> {
        Ok(self.solve(rho)?.matrix)
    }

    pub fn sample(&self, rhos: &[Complex64]) -> Result<WeylSamples, ForwardError> {
        let matrices = rhos
            .par_iter()
            .map(|&r| self.weyl(r))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(WeylSamples::new(
            rhos.to_vec(),
            self.graph.leaves().to_vec(),
            matrices,
        ))
    }
}

/// `rho_k = 10^{alpha_k} + i * im_offset` with `alpha_k` drawn uniformly
/// from `[alpha_min, alpha_max]`, sorted increasingly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoGridSpec {
    pub count: usize,
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub im_offset: f64,
    pub seed: u64,
}

impl Default for RhoGridSpec {
    fn default() -> Self {
        Self {
            count: 180,
            alpha_min: 0.0,
            alpha_max: 2.0,
            im_offset: 0.1,
            seed: 1,
        }
    }
}

impl RhoGridSpec {
    pub fn points(&self) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let dist = Uniform::new_inclusive(self.alpha_min, self.alpha_max);
        let mut alphas: Vec<f64> = (0..self.count).map(|_| dist.sample(&mut rng)).collect();
        alphas.sort_by(f64::total_cmp);
        alphas
            .into_iter()
            .map(|a| Complex64::new(10f64.powf(a), self.im_offset))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Edge;

    fn star(lengths: &[f64]) -> (TreeGraph, Vec<EdgeData>) {
        let n = lengths.len();
        let g = TreeGraph::new(
            (0..=n).collect(),
            (0..n)
                .map(|i| Edge {
                    id: i,
                    a: 0,
                    b: i + 1,
                    length: lengths[i],
                })
                .collect(),
            None,
        )
        .unwrap();
        let e = (0..n)
            .map(|i| EdgeData::from_fn(i, i + 1, 0, lengths[i], 64, |_| 0.0).unwrap())
            .collect();
        (g, e)
    }

    #[test]
    fn single_edge_closed_form() {
        let (g, e) = star(&[1.0]);
        // a single edge between two leaves: vertex 0 has degree 1 too
        let model = ForwardModel::new(g, &e).unwrap();
        let rho = Complex64::new(2.0, 0.1);
        let m = model.weyl(rho).unwrap();
        let leaves = model.graph().leaves().to_vec();
        let i1 = leaves.iter().position(|&v| v == 1).unwrap();
        let i0 = 1 - i1;
        let cot = rho.cos() / rho.sin();
        assert!((m[(i1, i1)] + rho * cot).norm() < 1e-12);
        assert!((m[(i1, i0)] - rho / rho.sin()).norm() < 1e-12);
        assert!((m[(i0, i0)] + rho * cot).norm() < 1e-12);
    }

    #[test]
    fn two_edge_star_is_one_interval() {
        let (g, e) = star(&[1.0, 1.0]);
        let model = ForwardModel::new(g, &e).unwrap();
        let rho = Complex64::new(1.3, 0.1);
        let m = model.weyl(rho).unwrap();
        let two = 2.0 * rho;
        assert!((m[(0, 0)] + rho * two.cos() / two.sin()).norm() < 1e-12);
        assert!((m[(0, 1)] - rho / two.sin()).norm() < 1e-12);
        let t = rho.tan();
        assert!((m[(0, 0)] - rho / 2.0 * (t - 1.0 / t)).norm() < 1e-12);
    }

    #[test]
    fn grid_is_sorted_and_deterministic() {
        let spec = RhoGridSpec::default();
        let a = spec.points();
        assert_eq!(a.len(), 180);
        assert_eq!(a, spec.points());
        assert!(a.windows(2).all(|w| w[0].re <= w[1].re));
        assert!(a.iter().all(|r| r.re >= 1.0 && r.re <= 100.0 && r.im == 0.1));
    }

    #[test]
    fn rejects_real_lambda() {
        let (g, e) = star(&[1.0, 2.0, 0.5]);
        let model = ForwardModel::new(g, &e).unwrap();
        assert!(matches!(
            model.weyl(Complex64::new(3.0, 0.0)),
            Err(ForwardError::RealSpectralParameter { .. })
        ));
    }
}
