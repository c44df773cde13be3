//! End-to-end runs: forward sampling, the peeling loop and comparison
//! against reference potentials.
//!
//! The inverse loop repeats sheaf recovery, endpoint functions, peeling and
//! reduction until a star remains, whose edges are then recovered directly.
//! A tree with a single edge is treated as a one-edge star seen from its
//! first leaf.

use crate::edge::EdgeData;
use crate::forward::{ForwardError, ForwardModel, RhoGridSpec};
use crate::graph::{EdgeId, GraphError, Sheaf, SheafSearch, TreeGraph, VertexId};
use crate::graphfile::{GraphFile, GraphFileError};
use crate::peel::{peel, PeelError};
use crate::sheaf_inverse::{endpoint_functions, recover_leaf_edge, EdgeRecovery, InverseError, SheafLeaf, SolverConfig};
use crate::weyl::WeylSamples;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    GraphFile(#[from] GraphFileError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Forward(#[from] ForwardError),
    #[error("Weyl samples do not fit the tree: {0}")]
    SampleMismatch(String),
    #[error("edge {edge}: {source}")]
    Inverse { edge: EdgeId, source: InverseError },
    #[error(transparent)]
    Peel(#[from] PeelError),
    #[error("recovered edges {recovered:?} differ from reference edges {reference:?}")]
    EdgeSetMismatch {
        recovered: Vec<EdgeId>,
        reference: Vec<EdgeId>,
    },
    #[error("{path}: {detail}")]
    Recovered { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// Whether the failure lies in the inputs rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        match self {
            Self::Inverse { source, .. } => matches!(source, InverseError::InsufficientSamples { .. }),
            Self::Forward(_) | Self::Peel(_) => false,
            _ => true,
        }
    }
}

/// Forward problem for a graph file with potentials.
pub fn run_forward(file: &GraphFile, grid: &RhoGridSpec) -> Result<WeylSamples, PipelineError> {
    let graph = file.graph()?;
    let model = ForwardModel::new(graph, &file.edge_data()?)?;
    let mut samples = model.sample(&grid.points())?;
    samples.provenance.push(format!(
        "grid count={} alpha_min={} alpha_max={} im_offset={} seed={}",
        grid.count, grid.alpha_min, grid.alpha_max, grid.im_offset, grid.seed
    ));
    Ok(samples)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeReport {
    pub edge: EdgeId,
    /// Vertex at `x = 0` during recovery.
    pub origin: VertexId,
    pub length: f64,
    pub endpoint_residual: f64,
    pub endpoint_condition: f64,
    pub dirichlet_roots: usize,
    pub neumann_roots: usize,
    pub negative_eigenvalues: usize,
    pub interlacing: bool,
    pub t0_residual: f64,
    pub interior_condition: f64,
    pub interior_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationReport {
    pub abscission: Option<VertexId>,
    /// Final star (or single edge): no peeling follows.
    pub terminal: bool,
    pub samples: usize,
    pub edges: Vec<EdgeReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pivot: Option<VertexId>,
    /// Sample indices (within this iteration's input) dropped by the peel.
    pub dropped_samples: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config: SolverConfig,
    pub iterations: Vec<IterationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// Not serialised, so that reports of identical runs are identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is serialisable")
    }
}

/// Recovered potential on one edge, with `x = 0` at vertex `a` of the
/// input description.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredEdgePotential {
    pub edge: EdgeId,
    pub xs: Vec<f64>,
    pub q: Vec<f64>,
}

impl RecoveredEdgePotential {
    pub fn file_name(edge: EdgeId) -> String {
        format!("edge_{edge}.csv")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,q_recovered\n");
        for (x, q) in self.xs.iter().zip(&self.q) {
            let _ = writeln!(out, "{x},{q}");
        }
        out
    }

    pub fn from_csv(edge: EdgeId, text: &str) -> Result<Self, String> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or("empty file")?;
        if !header.trim().starts_with("x,q_recovered") {
            return Err(format!("unexpected header {header:?}"));
        }
        let (mut xs, mut q) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            let parse = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", n + 1));
            if f.len() < 2 {
                return Err(format!("row {}: expected at least 2 fields", n + 1));
            }
            xs.push(parse(f[0])?);
            q.push(parse(f[1])?);
        }
        Ok(Self { edge, xs, q })
    }
}

#[derive(Debug, Clone)]
pub struct InverseRun {
    /// Sorted by edge id.
    pub potentials: Vec<RecoveredEdgePotential>,
    pub report: RunReport,
}

impl InverseRun {
    pub fn write(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        for p in &self.potentials {
            std::fs::write(dir.join(RecoveredEdgePotential::file_name(p.edge)), p.to_csv())?;
        }
        std::fs::write(dir.join("report.json"), self.report.to_json())?;
        Ok(())
    }
}

/// Failed run together with everything recorded up to the failure.
#[derive(Debug)]
pub struct InverseFailure {
    pub error: PipelineError,
    pub report: RunReport,
}

/// Recovers every edge potential of `graph` from `samples`. Leaves of the
/// samples must follow the leaf order of `graph`. `reference`, when given,
/// only fills the error column of the report.
pub fn run_inverse(
    graph: &TreeGraph,
    samples: &WeylSamples,
    cfg: &SolverConfig,
    reference: Option<&[EdgeData]>,
) -> Result<InverseRun, Box<InverseFailure>> {
    let start = Instant::now();
    let mut report = RunReport {
        config: *cfg,
        iterations: Vec::new(),
        failure: None,
        wall_time: Duration::ZERO,
    };
    let mut potentials = Vec::new();
    let outcome = peel_loop(graph, samples, cfg, reference, &mut report, &mut potentials);
    report.wall_time = start.elapsed();
    match outcome {
        Ok(()) => {
            potentials.sort_by_key(|p| p.edge);
            Ok(InverseRun { potentials, report })
        }
        Err(error) => {
            report.failure = Some(error.to_string());
            Err(Box::new(InverseFailure { error, report }))
        }
    }
}

fn peel_loop(
    graph: &TreeGraph,
    samples: &WeylSamples,
    cfg: &SolverConfig,
    reference: Option<&[EdgeData]>,
    report: &mut RunReport,
    potentials: &mut Vec<RecoveredEdgePotential>,
) -> Result<(), PipelineError> {
    if samples.leaves != graph.leaves() {
        return Err(PipelineError::SampleMismatch(format!(
            "sample leaves {:?}, tree leaves {:?}",
            samples.leaves,
            graph.leaves()
        )));
    }
    let mut graph = graph.clone();
    let mut current = samples.clone();
    loop {
        let (sheaf, terminal) = match graph.find_sheaf() {
            Ok(SheafSearch::Sheaf(s)) => (s, false),
            Ok(SheafSearch::StarTerminal(s)) => (s, true),
            Err(GraphError::NoInternalVertex) => {
                let e = graph.edges()[0];
                let leaf = graph.leaves()[0];
                let sheaf = Sheaf {
                    abscission: e.other(leaf),
                    leaf_edges: vec![e.id],
                    stem: None,
                };
                (sheaf, true)
            }
            Err(e) => return Err(e.into()),
        };
        let need = cfg.required_samples(sheaf.size());
        if current.len() < need {
            return Err(PipelineError::Inverse {
                edge: sheaf.leaf_edges[0],
                source: InverseError::InsufficientSamples {
                    have: current.len(),
                    need,
                },
            });
        }
        let origins: Vec<VertexId> = sheaf.leaf_edges.iter().map(|&e| leaf_of(&graph, &sheaf, e)).collect();
        let leaves: Vec<SheafLeaf> = sheaf
            .leaf_edges
            .iter()
            .zip(&origins)
            .map(|(&e, &v)| SheafLeaf {
                column: current.leaves.iter().position(|&l| l == v).expect("leaf is sampled"),
                length: graph.edge(e).expect("edge exists").length,
            })
            .collect();
        let recovered: Vec<EdgeRecovery> = (0..leaves.len())
            .into_par_iter()
            .map(|i| {
                recover_leaf_edge(&current, &leaves, i, cfg).map_err(|source| PipelineError::Inverse {
                    edge: sheaf.leaf_edges[i],
                    source,
                })
            })
            .collect::<Result<_, _>>()?;

        let mut iteration = IterationReport {
            abscission: (sheaf.leaf_edges.len() > 1 || !terminal).then_some(sheaf.abscission),
            terminal,
            samples: current.len(),
            edges: Vec::new(),
            pivot: None,
            dropped_samples: Vec::new(),
        };
        for ((rec, &e), &origin) in recovered.iter().zip(&sheaf.leaf_edges).zip(&origins) {
            let edge = *graph.edge(e).expect("edge exists");
            let pot = sample_recovered(rec, e, edge.a == origin, cfg.xm_points + 2);
            let max_rel_error = reference
                .and_then(|r| r.iter().find(|d| d.edge == e))
                .map(|d| edge_errors(&pot, d).max_rel);
            iteration.edges.push(edge_report(rec, e, origin, max_rel_error));
            potentials.push(pot);
        }
        if terminal {
            report.iterations.push(iteration);
            return Ok(());
        }

        let tables = recovered
            .par_iter()
            .zip(&sheaf.leaf_edges)
            .map(|(rec, &e)| {
                endpoint_functions(rec, &current.rhos, cfg).map_err(|source| PipelineError::Inverse { edge: e, source })
            })
            .collect::<Result<Vec<_>, _>>();
        let tables = match tables {
            Ok(t) => t,
            Err(e) => {
                report.iterations.push(iteration);
                return Err(e);
            }
        };
        let out = match peel(&current, &origins, &tables, sheaf.abscission, cfg.drop_threshold) {
            Ok(o) => o,
            Err(e) => {
                report.iterations.push(iteration);
                return Err(e.into());
            }
        };
        iteration.pivot = Some(out.pivot);
        iteration.dropped_samples = out.dropped;
        report.iterations.push(iteration);
        graph = graph.reduce(&sheaf)?;
        current = out.samples;
    }
}

fn leaf_of(graph: &TreeGraph, sheaf: &Sheaf, e: EdgeId) -> VertexId {
    graph.edge(e).expect("edge exists").other(sheaf.abscission)
}

fn sample_recovered(rec: &EdgeRecovery, edge: EdgeId, same_direction: bool, points: usize) -> RecoveredEdgePotential {
    let l = rec.length;
    let xs: Vec<f64> = (0..points).map(|k| l * k as f64 / (points - 1) as f64).collect();
    let q = xs
        .iter()
        .map(|&x| if same_direction { rec.q(x) } else { rec.q(l - x) })
        .collect();
    RecoveredEdgePotential { edge, xs, q }
}

fn edge_report(rec: &EdgeRecovery, edge: EdgeId, origin: VertexId, max_rel_error: Option<f64>) -> EdgeReport {
    EdgeReport {
        edge,
        origin,
        length: rec.length,
        endpoint_residual: rec.endpoint.report.residual,
        endpoint_condition: rec.endpoint.report.condition,
        dirichlet_roots: rec.spectra.mu.len(),
        neumann_roots: rec.spectra.nu.len(),
        negative_eigenvalues: rec.spectra.mu.iter().filter(|m| m.im > 0.0).count(),
        interlacing: rec.spectra.interlaces(),
        t0_residual: rec.spectra.t0_report.residual,
        interior_condition: rec.interior.worst_condition,
        interior_residual: rec.interior.worst_residual,
        max_rel_error,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeError {
    pub edge: EdgeId,
    pub max_abs: f64,
    /// Over points where `|q_ref| > 0.1 max |q_ref|`.
    pub max_rel: f64,
}

pub fn edge_errors(rec: &RecoveredEdgePotential, reference: &EdgeData) -> EdgeError {
    let refs: Vec<f64> = rec.xs.iter().map(|&x| reference.value_at(x)).collect();
    let peak = refs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut max_abs = 0.0f64;
    let mut max_rel = 0.0f64;
    for (q, r) in rec.q.iter().zip(&refs) {
        let d = (q - r).abs();
        max_abs = max_abs.max(d);
        if r.abs() > 0.1 * peak {
            max_rel = max_rel.max(d / r.abs());
        }
    }
    EdgeError {
        edge: rec.edge,
        max_abs,
        max_rel,
    }
}

/// Per-edge errors plus `x,q_recovered,q_reference,rel_error` curve files
/// (keyed by edge id). The relative error column is empty where the
/// reference is below a tenth of its peak.
pub fn compare(
    recovered: &[RecoveredEdgePotential],
    reference: &GraphFile,
) -> Result<(Vec<EdgeError>, Vec<(EdgeId, String)>), PipelineError> {
    let data = reference.edge_data()?;
    let have: BTreeSet<EdgeId> = recovered.iter().map(|r| r.edge).collect();
    let want: BTreeSet<EdgeId> = data.iter().map(|d| d.edge).collect();
    if have != want || have.len() != recovered.len() {
        return Err(PipelineError::EdgeSetMismatch {
            recovered: recovered.iter().map(|r| r.edge).collect(),
            reference: want.into_iter().collect(),
        });
    }
    let mut errors = Vec::new();
    let mut curves = Vec::new();
    for rec in recovered {
        let d = data.iter().find(|d| d.edge == rec.edge).expect("edge sets agree");
        errors.push(edge_errors(rec, d));
        let refs: Vec<f64> = rec.xs.iter().map(|&x| d.value_at(x)).collect();
        let peak = refs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut csv = String::from("x,q_recovered,q_reference,rel_error\n");
        for ((x, q), r) in rec.xs.iter().zip(&rec.q).zip(&refs) {
            if r.abs() > 0.1 * peak {
                let _ = writeln!(csv, "{x},{q},{r},{}", (q - r).abs() / r.abs());
            } else {
                let _ = writeln!(csv, "{x},{q},{r},");
            }
        }
        curves.push((rec.edge, csv));
    }
    errors.sort_by_key(|e| e.edge);
    curves.sort_by_key(|c| c.0);
    Ok((errors, curves))
}

/// Reads every `edge_<id>.csv` in `dir`.
pub fn read_recovered(dir: &Path) -> Result<Vec<RecoveredEdgePotential>, PipelineError> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let Some(id) = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("edge_"))
            .and_then(|n| n.strip_suffix(".csv"))
            .and_then(|n| n.parse::<EdgeId>().ok())
        else {
            continue;
        };
        let text = std::fs::read_to_string(&path)?;
        out.push(
            RecoveredEdgePotential::from_csv(id, &text).map_err(|detail| PipelineError::Recovered {
                path: path.display().to_string(),
                detail,
            })?,
        );
    }
    out.sort_by_key(|p| p.edge);
    Ok(out)
}
