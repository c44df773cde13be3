//! JSON tree description.
//!
//! ```json
//! {"vertices": [0, 1, 2],
//!  "edges": [{"a": 1, "b": 0, "length": 1.0, "potential": {"preset": "gaussian"}},
//!            {"a": 2, "b": 0, "length": 2.0, "potential": {"samples": [0.0, 0.1]}}],
//!  "leaf_order": [1, 2]}
//! ```
//!
//! Edge ids are positions in `edges`. Potentials are given with `x = 0` at
//! `a`; `samples` must be uniform over `[0, length]`. `potential` may be
//! omitted for topology-only files.

use crate::edge::{EdgeData, EdgeDataError, DEFAULT_SAMPLES};
use crate::graph::{Edge, GraphError, TreeGraph, VertexId};
use crate::potential::Preset;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid graph JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("edge {edge}: {detail}")]
    Potential { edge: usize, detail: String },
    #[error("edge {edge} has no potential")]
    MissingPotential { edge: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Edge(#[from] EdgeDataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Preset { preset: String },
    Samples { samples: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub a: VertexId,
    pub b: VertexId,
    pub length: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaf_order: Option<Vec<VertexId>>,
    /// Grid size used when sampling presets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_edge: Option<usize>,
}

impl GraphFile {
    pub fn parse(text: &str) -> Result<Self, GraphFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, GraphFileError> {
        let text = std::fs::read_to_string(path).map_err(|source| GraphFileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn graph(&self) -> Result<TreeGraph, GraphFileError> {
        let edges = self
            .edges
            .iter()
            .enumerate()
            .map(|(id, e)| Edge {
                id,
                a: e.a,
                b: e.b,
                length: e.length,
            })
            .collect();
        Ok(TreeGraph::new(
            self.vertices.clone(),
            edges,
            self.leaf_order.clone(),
        )?)
    }

    pub fn has_potentials(&self) -> bool {
        self.edges.iter().all(|e| e.potential.is_some())
    }

    /// Potential samples of every edge, oriented from `a` to `b`.
    pub fn edge_data(&self) -> Result<Vec<EdgeData>, GraphFileError> {
        let points = self.samples_per_edge.unwrap_or(DEFAULT_SAMPLES);
        self.edges
            .iter()
            .enumerate()
            .map(|(id, e)| match &e.potential {
                None => Err(GraphFileError::MissingPotential { edge: id }),
                Some(PotentialSpec::Preset { preset }) => {
                    let p: Preset = preset
                        .parse()
                        .map_err(|detail| GraphFileError::Potential { edge: id, detail })?;
                    Ok(EdgeData::from_fn(id, e.a, e.b, e.length, points, |x| p.eval(x))?)
                }
                Some(PotentialSpec::Samples { samples }) => {
                    Ok(EdgeData::new(id, e.a, e.b, e.length, samples.clone())?)
                }
            })
            .collect()
    }

    /// Same tree without potentials.
    pub fn topology(&self) -> Self {
        let mut t = self.clone();
        t.edges.iter_mut().for_each(|e| e.potential = None);
        t.samples_per_edge = None;
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_presets_and_samples() {
        let samples: Vec<String> = (0..64).map(|i| format!("{}", i as f64 / 63.0)).collect();
        let text = format!(
            r#"{{"vertices":[0,1,2],"edges":[
                {{"a":1,"b":0,"length":1.0,"potential":{{"preset":"gaussian"}}}},
                {{"a":2,"b":0,"length":2.0,"potential":{{"samples":[{}]}}}}],
              "leaf_order":[2,1],"samples_per_edge":101}}"#,
            samples.join(",")
        );
        let f = GraphFile::parse(&text).unwrap();
        let g = f.graph().unwrap();
        assert_eq!(g.leaves(), &[2, 1]);
        let d = f.edge_data().unwrap();
        assert_eq!(d[0].samples.len(), 101);
        assert_eq!(d[1].samples.len(), 64);
        assert_eq!((d[1].start, d[1].end), (2, 0));
        assert!(!f.topology().has_potentials());
    }

    #[test]
    fn unknown_preset_is_reported() {
        let text = r#"{"vertices":[0,1],"edges":[{"a":0,"b":1,"length":1.0,"potential":{"preset":"nope"}}]}"#;
        let f = GraphFile::parse(text).unwrap();
        assert!(matches!(f.edge_data(), Err(GraphFileError::Potential { edge: 0, .. })));
    }
}
