#![allow(dead_code)]

use num_complex::Complex64;
use qtree::edge::EdgeData;
use qtree::forward::ForwardModel;
use qtree::graph::{Edge, Sheaf, TreeGraph};
use qtree::nsbf::Fundamental;
use qtree::graphfile::GraphFile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::PathBuf;

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

pub fn example(name: &str) -> GraphFile {
    GraphFile::load(&data_path(name)).expect("bundled example parses")
}

pub fn model_of(file: &GraphFile) -> ForwardModel {
    ForwardModel::new(file.graph().unwrap(), &file.edge_data().unwrap()).unwrap()
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Star with centre `0` and leaves `1..=n`; edge `i` runs from leaf `i + 1`.
pub fn star(lengths: &[f64], q: impl Fn(usize, f64) -> f64) -> (TreeGraph, Vec<EdgeData>) {
    let n = lengths.len();
    let edges: Vec<Edge> = (0..n)
        .map(|i| Edge {
            id: i,
            a: i + 1,
            b: 0,
            length: lengths[i],
        })
        .collect();
    let g = TreeGraph::new((0..=n).collect(), edges, None).unwrap();
    let data = (0..n)
        .map(|i| EdgeData::from_fn(i, i + 1, 0, lengths[i], 2001, |x| q(i, x)).unwrap())
        .collect();
    (g, data)
}

/// Tree whose internal vertices all have degree at least three, grown from
/// a three-star by turning leaves into branch points.
pub fn random_branching_tree(rng: &mut ChaCha8Rng, max_edges: usize) -> TreeGraph {
    let mut edges: Vec<(usize, usize)> = vec![(0, 1), (0, 2), (0, 3)];
    let mut next = 4;
    let mut leaves = vec![1, 2, 3];
    loop {
        let children = rng.gen_range(2..=3);
        if edges.len() + children > max_edges {
            break;
        }
        let v = leaves.swap_remove(rng.gen_range(0..leaves.len()));
        for _ in 0..children {
            edges.push((v, next));
            leaves.push(next);
            next += 1;
        }
        if rng.gen_bool(0.15) {
            break;
        }
    }
    let list = edges
        .iter()
        .enumerate()
        .map(|(id, &(u, v))| {
            // alternate orientations so both conventions are exercised
            let (a, b) = if id % 2 == 0 { (u, v) } else { (v, u) };
            Edge {
                id,
                a,
                b,
                length: rng.gen_range(0.5..1.5),
            }
        })
        .collect();
    TreeGraph::new((0..next).collect(), list, None).unwrap()
}

/// Smooth potentials: a constant plus three random Fourier modes per edge.
pub fn random_potentials(rng: &mut ChaCha8Rng, graph: &TreeGraph, points: usize) -> Vec<EdgeData> {
    graph
        .edges()
        .iter()
        .map(|e| {
            let c0: f64 = rng.gen_range(-1.0..3.0);
            let modes: Vec<(f64, f64)> = (0..3)
                .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let l = e.length;
            EdgeData::from_fn(e.id, e.a, e.b, l, points, |x| {
                let t = std::f64::consts::PI * x / l;
                c0 + modes
                    .iter()
                    .enumerate()
                    .map(|(k, (a, b))| a * ((k + 1) as f64 * t).cos() + b * ((k + 1) as f64 * t).sin())
                    .sum::<f64>()
            })
            .unwrap()
        })
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random points `rho = a + i b` with `a` in `[re_lo, re_hi]`, `b` in
/// `(0, im_hi]`.
pub fn random_rhos(rng: &mut ChaCha8Rng, count: usize, re_lo: f64, re_hi: f64, im_hi: f64) -> Vec<Complex64> {
    (0..count)
        .map(|_| c(rng.gen_range(re_lo..re_hi), rng.gen_range(0.01..im_hi)))
        .collect()
}

/// Forward-computed endpoint functions of `edges` at every `rho`.
pub fn exact_tables(model: &ForwardModel, edges: &[usize], rhos: &[Complex64]) -> Vec<Vec<Fundamental>> {
    let g = model.graph();
    let ends: Vec<_> = rhos.iter().map(|&r| model.end_values(r)).collect();
    edges
        .iter()
        .map(|&e| {
            let p = g.edge_position(e).unwrap();
            ends.iter()
                .map(|v| Fundamental {
                    phi: v[p].phi,
                    s: v[p].s,
                    dphi: v[p].dphi,
                    ds: v[p].ds,
                })
                .collect()
        })
        .collect()
}

/// Leaf vertices of a sheaf's edges, in sheaf order.
pub fn sheaf_leaves(graph: &TreeGraph, sheaf: &Sheaf) -> Vec<usize> {
    sheaf.leaf_edges.iter().map(|&e| graph.leaf_end(e).unwrap()).collect()
}
