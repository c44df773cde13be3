//! Weyl matrix of the tree left after removing a sheaf's leaf edges.
//!
//! With pivot leaf `p` of the sheaf `J`, `w = phi_p + M_pp S_p` (all at
//! `x = L`) and the abscission vertex as new leaf `0`:
//!
//! ```text
//! M~00 = (phi'_p + M_pp S'_p + sum_{j in J, j != p} M_pj S'_j) / w
//! M~0i = M_pi / w
//! M~i0 = sum_{j in J} M_ij S'_j - M_ip S_p M~00
//! M~ij = M_ij - M_ip S_p M~0j
//! ```
//!
//! Every `M` is a derivative into the tree, so the flux leaving the
//! abscission vertex along the stem is `+sum_j M_ij S'_j` by Kirchhoff.

use crate::graph::VertexId;
use crate::nsbf::Fundamental;
use crate::weyl::WeylSamples;
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PeelError {
    #[error("sheaf leaf {leaf} is not a leaf of the samples")]
    UnknownLeaf { leaf: VertexId },
    #[error("endpoint table {index} has {found} entries for {expected} samples")]
    TableMismatch {
        index: usize,
        found: usize,
        expected: usize,
    },
    #[error("every sample has |phi_1 + M_11 S_1| below the threshold")]
    SmallDenominator,
}

#[derive(Debug, Clone)]
pub struct PeelOutcome {
    pub samples: WeylSamples,
    /// Sample indices (of the input) removed for a small denominator.
    pub dropped: Vec<usize>,
    /// Sheaf leaf used as pivot.
    pub pivot: VertexId,
}

/// `sheaf_leaves[j]` is the leaf vertex of the `j`-th sheaf edge and
/// `tables[j][k]` its endpoint functions at `samples.rhos[k]`. Samples with
/// `|w| < drop_threshold * mean|w|` are dropped.
pub fn peel(
    samples: &WeylSamples,
    sheaf_leaves: &[VertexId],
    tables: &[Vec<Fundamental>],
    abscission: VertexId,
    drop_threshold: f64,
) -> Result<PeelOutcome, PeelError> {
    let k_count = samples.len();
    let cols: Vec<usize> = sheaf_leaves
        .iter()
        .map(|&v| {
            samples
                .leaves
                .iter()
                .position(|&l| l == v)
                .ok_or(PeelError::UnknownLeaf { leaf: v })
        })
        .collect::<Result<_, _>>()?;
    for (index, t) in tables.iter().enumerate() {
        if t.len() != k_count {
            return Err(PeelError::TableMismatch {
                index,
                found: t.len(),
                expected: k_count,
            });
        }
    }
    let denom = |j: usize, k: usize| -> Complex64 {
        let c = cols[j];
        tables[j][k].phi + samples.matrices[k][(c, c)] * tables[j][k].s
    };
    let mean_abs = |j: usize| (0..k_count).map(|k| denom(j, k).norm()).sum::<f64>() / k_count as f64;
    let (p, scale) = (0..cols.len())
        .map(|j| (j, mean_abs(j)))
        .fold((0, f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });

    let rest: Vec<usize> = (0..samples.dim()).filter(|c| !cols.contains(c)).collect();
    let mut leaves = vec![abscission];
    leaves.extend(rest.iter().map(|&c| samples.leaves[c]));
    let n = leaves.len();
    let cp = cols[p];

    let mut rhos = Vec::with_capacity(k_count);
    let mut matrices = Vec::with_capacity(k_count);
    let mut dropped = Vec::new();
    for k in 0..k_count {
        let w = denom(p, k);
        if !(w.norm() >= drop_threshold * scale) {
            dropped.push(k);
            continue;
        }
        let m = &samples.matrices[k];
        let ds = |j: usize| tables[j][k].ds;
        let sp = tables[p][k].s;
        let mut out = DMatrix::<Complex64>::zeros(n, n);
        let mut flux = tables[p][k].dphi + m[(cp, cp)] * ds(p);
        for (j, &c) in cols.iter().enumerate().filter(|&(j, _)| j != p) {
            flux += m[(cp, c)] * ds(j);
        }
        let m00 = flux / w;
        out[(0, 0)] = m00;
        for (a, &ci) in rest.iter().enumerate() {
            out[(0, a + 1)] = m[(cp, ci)] / w;
        }
        for (a, &ci) in rest.iter().enumerate() {
            let through: Complex64 = cols.iter().enumerate().map(|(j, &c)| m[(ci, c)] * ds(j)).sum();
            let carry = m[(ci, cp)] * sp;
            out[(a + 1, 0)] = through - carry * m00;
            for (b, &cj) in rest.iter().enumerate() {
                out[(a + 1, b + 1)] = m[(ci, cj)] - carry * out[(0, b + 1)];
            }
        }
        rhos.push(samples.rhos[k]);
        matrices.push(out);
    }
    if matrices.is_empty() {
        return Err(PeelError::SmallDenominator);
    }
    let mut reduced = WeylSamples::new(rhos, leaves, matrices);
    reduced.provenance = vec![format!("peeled_from={} sheaf={abscission}", samples.digest())];
    Ok(PeelOutcome {
        samples: reduced,
        dropped,
        pivot: sheaf_leaves[p],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::ForwardModel;
    use crate::graph::SheafSearch;
    use crate::graphfile::GraphFile;

    fn exact_tables(model: &ForwardModel, edges: &[usize], rhos: &[Complex64]) -> Vec<Vec<Fundamental>> {
        let g = model.graph();
        edges
            .iter()
            .map(|&e| {
                let p = g.edge_position(e).unwrap();
                rhos.iter()
                    .map(|&r| {
                        let v = model.end_values(r)[p];
                        Fundamental {
                            phi: v.phi,
                            s: v.s,
                            dphi: v.dphi,
                            ds: v.ds,
                        }
                    })
                    .collect()
            })
            .collect()
    }

    #[test]
    fn matches_forward_assembly_on_example_one() {
        let file = GraphFile::parse(include_str!("../data/example1.json")).unwrap();
        let g = file.graph().unwrap();
        let data = file.edge_data().unwrap();
        let model = ForwardModel::new(g.clone(), &data).unwrap();
        let rhos: Vec<Complex64> = [1.3, 4.7, 22.0, 81.0].iter().map(|&r| Complex64::new(r, 0.1)).collect();
        let samples = model.sample(&rhos).unwrap();
        let SheafSearch::Sheaf(sheaf) = g.find_sheaf().unwrap() else {
            panic!("expected a sheaf")
        };
        let leaves: Vec<VertexId> = sheaf.leaf_edges.iter().map(|&e| g.leaf_end(e).unwrap()).collect();
        let tables = exact_tables(&model, &sheaf.leaf_edges, &rhos);
        let out = peel(&samples, &leaves, &tables, sheaf.abscission, 1e-12).unwrap();
        assert!(out.dropped.is_empty());

        let reduced = g.reduce(&sheaf).unwrap();
        let oracle = ForwardModel::new(reduced.clone(), &data).unwrap().sample(&rhos).unwrap();
        assert_eq!(out.samples.leaves, oracle.leaves);
        for (a, b) in out.samples.matrices.iter().zip(&oracle.matrices) {
            let rel = (a - b).norm() / b.norm();
            assert!(rel < 1e-9, "relative deviation {rel:e}");
        }
        assert!(out.samples.provenance[0].starts_with("peeled_from="));
    }
}
