//! Metric tree model: validation, sheaf detection and reduction after a
//! sheaf's leaf edges are peeled off.
//!
//! Vertex and edge identifiers are stable across [`TreeGraph::reduce`], so a
//! reduced tree still refers to the edges of the original input.

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("edge {edge} closes a cycle")]
    CycleDetected { edge: EdgeId },
    #[error("vertex {vertex} is not connected to vertex {root}")]
    Disconnected { vertex: VertexId, root: VertexId },
    #[error("edge {edge} has non-positive or non-finite length {length}")]
    NonPositiveLength { edge: EdgeId, length: f64 },
    #[error("tree has {found} leaves, at least 2 are required")]
    TooFewLeaves { found: usize },
    #[error("edge {edge} references unknown vertex {vertex}")]
    UnknownVertex { edge: EdgeId, vertex: VertexId },
    #[error("duplicate {what} id {id}")]
    Duplicate { what: &'static str, id: usize },
    #[error("leaf order does not match the degree-one vertices: {detail}")]
    LeafOrderMismatch { detail: String },
    #[error("graph has a single edge and no internal vertex")]
    NoInternalVertex,
    #[error("no sheaf with at least two leaf edges exists; vertex {vertex} sits on a chain of degree-two vertices")]
    DegreeTwoChain { vertex: VertexId },
    #[error("sheaf at vertex {vertex} does not match the graph: {detail}")]
    SheafMismatch { vertex: VertexId, detail: String },
}

/// An edge `a -- b`; its coordinate runs from `x = 0` at `a` to `x = length` at `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub id: EdgeId,
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn touches(&self, v: VertexId) -> bool {
        self.a == v || self.b == v
    }
}

/// A validated metric tree with a fixed leaf ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeGraph {
    vertices: Vec<VertexId>,
    edges: Vec<Edge>,
    adjacency: BTreeMap<VertexId, Vec<EdgeId>>,
    leaves: Vec<VertexId>,
}

/// Star-shaped subtree whose edges, except possibly the stem, are leaf edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Sheaf {
    pub abscission: VertexId,
    /// Leaf edges in the tree's leaf order.
    pub leaf_edges: Vec<EdgeId>,
    pub stem: Option<EdgeId>,
}

impl Sheaf {
    pub fn size(&self) -> usize {
        self.leaf_edges.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SheafSearch {
    Sheaf(Sheaf),
    /// Every edge meets one internal vertex; the returned sheaf has no stem.
    StarTerminal(Sheaf),
}

impl TreeGraph {
    /// Builds and validates a tree. `leaf_order`, when given, must list every
    /// degree-one vertex exactly once; otherwise leaves follow vertex order.
    pub fn new(
        vertices: Vec<VertexId>,
        edges: Vec<Edge>,
        leaf_order: Option<Vec<VertexId>>,
    ) -> Result<Self, GraphError> {
        let mut seen = BTreeSet::new();
        for &v in &vertices {
            if !seen.insert(v) {
                return Err(GraphError::Duplicate { what: "vertex", id: v });
            }
        }
        let mut edge_ids = BTreeSet::new();
        let mut adjacency: BTreeMap<VertexId, Vec<EdgeId>> =
            vertices.iter().map(|&v| (v, Vec::new())).collect();
        for e in &edges {
            if !edge_ids.insert(e.id) {
                return Err(GraphError::Duplicate { what: "edge", id: e.id });
            }
            for v in [e.a, e.b] {
                if !adjacency.contains_key(&v) {
                    return Err(GraphError::UnknownVertex { edge: e.id, vertex: v });
                }
            }
            if !(e.length.is_finite() && e.length > 0.0) {
                return Err(GraphError::NonPositiveLength {
                    edge: e.id,
                    length: e.length,
                });
            }
            adjacency.get_mut(&e.a).unwrap().push(e.id);
            if e.b != e.a {
                adjacency.get_mut(&e.b).unwrap().push(e.id);
            }
        }

        // union-find over vertex positions
        let pos: BTreeMap<VertexId, usize> =
            vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &edges {
            let ra = find(&mut parent, pos[&e.a]);
            let rb = find(&mut parent, pos[&e.b]);
            if ra == rb {
                return Err(GraphError::CycleDetected { edge: e.id });
            }
            parent[ra] = rb;
        }
        if let Some(&root) = vertices.first() {
            let r0 = find(&mut parent, 0);
            for (i, &v) in vertices.iter().enumerate() {
                if find(&mut parent, i) != r0 {
                    return Err(GraphError::Disconnected { vertex: v, root });
                }
            }
        }

        let degree_one: Vec<VertexId> = vertices
            .iter()
            .copied()
            .filter(|v| adjacency[v].len() == 1)
            .collect();
        if degree_one.len() < 2 {
            return Err(GraphError::TooFewLeaves {
                found: degree_one.len(),
            });
        }
        let leaves = match leaf_order {
            None => degree_one,
            Some(order) => {
                let given: BTreeSet<_> = order.iter().copied().collect();
                let expected: BTreeSet<_> = degree_one.iter().copied().collect();
                if given.len() != order.len() {
                    return Err(GraphError::LeafOrderMismatch {
                        detail: "repeated vertex".into(),
                    });
                }
                if given != expected {
                    return Err(GraphError::LeafOrderMismatch {
                        detail: format!("expected {:?}, got {:?}", expected, order),
                    });
                }
                order
            }
        };

        Ok(Self {
            vertices,
            edges,
            adjacency,
            leaves,
        })
    }

    pub fn vertices(&self) -> &[VertexId] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn leaves(&self) -> &[VertexId] {
        &self.leaves
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves.len()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    pub fn edge_position(&self, id: EdgeId) -> Option<usize> {
        self.edges.iter().position(|e| e.id == id)
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        self.adjacency.get(&v).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.incident(v).len()
    }

    pub fn is_leaf(&self, v: VertexId) -> bool {
        self.degree(v) == 1
    }

    /// Position of `v` in the leaf ordering.
    pub fn leaf_index(&self, v: VertexId) -> Option<usize> {
        self.leaves.iter().position(|&l| l == v)
    }

    /// The unique edge at leaf `v`.
    pub fn leaf_edge(&self, v: VertexId) -> Option<EdgeId> {
        if self.is_leaf(v) {
            Some(self.incident(v)[0])
        } else {
            None
        }
    }

    pub fn is_leaf_edge(&self, id: EdgeId) -> bool {
        self.edge(id)
            .map(|e| self.is_leaf(e.a) || self.is_leaf(e.b))
            .unwrap_or(false)
    }

    /// Leaf vertex of a leaf edge (the `a` end when both ends are leaves).
    pub fn leaf_end(&self, id: EdgeId) -> Option<VertexId> {
        let e = self.edge(id)?;
        if self.is_leaf(e.a) {
            Some(e.a)
        } else if self.is_leaf(e.b) {
            Some(e.b)
        } else {
            None
        }
    }

    pub fn internal_vertices(&self) -> Vec<VertexId> {
        self.vertices
            .iter()
            .copied()
            .filter(|&v| self.degree(v) > 1)
            .collect()
    }

    fn sheaf_at(&self, v: VertexId) -> Sheaf {
        let mut leaf_edges = Vec::new();
        let mut stem = None;
        for &eid in self.incident(v) {
            let e = self.edge(eid).unwrap();
            if self.is_leaf(e.other(v)) {
                leaf_edges.push(eid);
            } else {
                stem = Some(eid);
            }
        }
        leaf_edges.sort_by_key(|&eid| {
            let e = self.edge(eid).unwrap();
            self.leaf_index(e.other(v)).unwrap()
        });
        Sheaf {
            abscission: v,
            leaf_edges,
            stem,
        }
    }

    /// Locates the next sheaf to peel, smallest abscission vertex first.
    pub fn find_sheaf(&self) -> Result<SheafSearch, GraphError> {
        let internal = self.internal_vertices();
        match internal.len() {
            0 => return Err(GraphError::NoInternalVertex),
            1 => return Ok(SheafSearch::StarTerminal(self.sheaf_at(internal[0]))),
            _ => {}
        }
        for &v in &internal {
            let non_leaf = self
                .incident(v)
                .iter()
                .filter(|&&eid| !self.is_leaf(self.edge(eid).unwrap().other(v)))
                .count();
            let leaf = self.degree(v) - non_leaf;
            if non_leaf <= 1 && leaf >= 2 {
                return Ok(SheafSearch::Sheaf(self.sheaf_at(v)));
            }
        }
        // only chains through degree-two vertices can block every candidate
        let blocked = internal
            .iter()
            .copied()
            .find(|&v| self.degree(v) == 2)
            .unwrap_or(internal[0]);
        Err(GraphError::DegreeTwoChain { vertex: blocked })
    }

    /// Removes the leaf edges of `sheaf`; the abscission vertex becomes the
    /// first leaf of the result and the other leaves keep their order.
    pub fn reduce(&self, sheaf: &Sheaf) -> Result<TreeGraph, GraphError> {
        let v0 = sheaf.abscission;
        let mismatch = |detail: String| GraphError::SheafMismatch { vertex: v0, detail };
        let expected = self.sheaf_at(v0);
        if self.degree(v0) < 2 {
            return Err(mismatch("abscission vertex is not internal".into()));
        }
        if expected.stem.is_none() || sheaf.stem != expected.stem {
            return Err(mismatch("stem edge missing or different".into()));
        }
        let given: BTreeSet<_> = sheaf.leaf_edges.iter().collect();
        let want: BTreeSet<_> = expected.leaf_edges.iter().collect();
        if given != want || sheaf.leaf_edges.len() < 2 {
            return Err(mismatch(format!(
                "leaf edges {:?} differ from {:?}",
                sheaf.leaf_edges, expected.leaf_edges
            )));
        }

        let removed_leaves: BTreeSet<VertexId> = sheaf
            .leaf_edges
            .iter()
            .map(|&eid| self.edge(eid).unwrap().other(v0))
            .collect();
        let removed_edges: BTreeSet<EdgeId> = sheaf.leaf_edges.iter().copied().collect();
        let vertices: Vec<VertexId> = self
            .vertices
            .iter()
            .copied()
            .filter(|v| !removed_leaves.contains(v))
            .collect();
        let edges: Vec<Edge> = self
            .edges
            .iter()
            .copied()
            .filter(|e| !removed_edges.contains(&e.id))
            .collect();
        let mut leaves = vec![v0];
        leaves.extend(
            self.leaves
                .iter()
                .copied()
                .filter(|v| !removed_leaves.contains(v)),
        );
        TreeGraph::new(vertices, edges, Some(leaves))
    }
}
