use crate::graph::{EdgeId, TreeGraph, VertexId};
use crate::stencil::{interpolation_weights, UniformGrid};
use thiserror::Error;

/// Smallest admissible number of potential samples per edge.
pub const MIN_SAMPLES: usize = 64;
/// Default number of potential samples per edge.
pub const DEFAULT_SAMPLES: usize = 2001;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdgeDataError {
    #[error("edge {edge}: {found} samples, at least {MIN_SAMPLES} required")]
    TooFewSamples { edge: EdgeId, found: usize },
    #[error("edge {edge}: non-finite potential sample at index {index}")]
    NonFinite { edge: EdgeId, index: usize },
    #[error("edge {edge} is not part of the graph or its endpoints differ")]
    NotInGraph { edge: EdgeId },
}

/// Potential of one edge sampled on a uniform grid over `[0, length]`;
/// `x = 0` sits at vertex `start`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeData {
    pub edge: EdgeId,
    pub start: VertexId,
    pub end: VertexId,
    pub length: f64,
    pub samples: Vec<f64>,
}

impl EdgeData {
    pub fn new(
        edge: EdgeId,
        start: VertexId,
        end: VertexId,
        length: f64,
        samples: Vec<f64>,
    ) -> Result<Self, EdgeDataError> {
        if samples.len() < MIN_SAMPLES {
            return Err(EdgeDataError::TooFewSamples {
                edge,
                found: samples.len(),
            });
        }
        if let Some(index) = samples.iter().position(|q| !q.is_finite()) {
            return Err(EdgeDataError::NonFinite { edge, index });
        }
        Ok(Self {
            edge,
            start,
            end,
            length,
            samples,
        })
    }

    pub fn from_fn(
        edge: EdgeId,
        start: VertexId,
        end: VertexId,
        length: f64,
        points: usize,
        q: impl Fn(f64) -> f64,
    ) -> Result<Self, EdgeDataError> {
        let grid = UniformGrid::new(length, points);
        let samples = grid.nodes().into_iter().map(q).collect();
        Self::new(edge, start, end, length, samples)
    }

    pub fn grid(&self) -> UniformGrid {
        UniformGrid::new(self.length, self.samples.len())
    }

    /// Six-point interpolation of the samples at `x` in `[0, length]`.
    pub fn value_at(&self, x: f64) -> f64 {
        let (start, w) = interpolation_weights(&self.grid(), x.clamp(0.0, self.length));
        (0..w.len()).map(|r| self.samples[start + r] * w[r]).sum()
    }

    /// Same potential described from the opposite endpoint.
    pub fn reversed(&self) -> Self {
        let mut samples = self.samples.clone();
        samples.reverse();
        Self {
            edge: self.edge,
            start: self.end,
            end: self.start,
            length: self.length,
            samples,
        }
    }

    /// Orientation with `x = 0` at `v` (which must be an endpoint).
    pub fn oriented_from(&self, v: VertexId) -> Self {
        if v == self.start {
            self.clone()
        } else {
            debug_assert_eq!(v, self.end);
            self.reversed()
        }
    }

    /// Checks the endpoints against `graph` and, for leaf edges, puts the
    /// leaf at `x = 0`.
    pub fn normalized_for(&self, graph: &TreeGraph) -> Result<Self, EdgeDataError> {
        let e = graph
            .edge(self.edge)
            .ok_or(EdgeDataError::NotInGraph { edge: self.edge })?;
        let same = (e.a == self.start && e.b == self.end) || (e.a == self.end && e.b == self.start);
        if !same || (e.length - self.length).abs() > 1e-12 * e.length {
            return Err(EdgeDataError::NotInGraph { edge: self.edge });
        }
        Ok(match graph.leaf_end(self.edge) {
            Some(leaf) if leaf != self.start && !graph.is_leaf(self.start) => self.reversed(),
            _ => self.clone(),
        })
    }
}
