mod common;

use common::{c, example, model_of, star};
use nalgebra::DMatrix;
use num_complex::Complex64;
use qtree::forward::RhoGridSpec;
use qtree::graphfile::PotentialSpec;
use qtree::potential::Preset;
use qtree::weyl::WeylSamples;

/// Discrete Dirichlet-to-Neumann map of one edge for the three-point scheme
/// on `n` intervals. Row/column 0 is `x = 0`, 1 is `x = L`; outputs are
/// derivatives pointing into the edge, taken to second order.
fn edge_dtn(q: &dyn Fn(f64) -> f64, length: f64, n: usize, lambda: Complex64) -> [[Complex64; 2]; 2] {
    let h = length / n as f64;
    let diag: Vec<Complex64> = (1..n).map(|k| 2.0 + h * h * (q(k as f64 * h) - lambda)).collect();
    let solve = |left: f64, right: f64| -> Vec<Complex64> {
        // Thomas algorithm for the interior nodes, off-diagonals -1
        let mut d = diag.clone();
        let mut r: Vec<Complex64> = vec![c(0.0, 0.0); n - 1];
        r[0] += left;
        r[n - 2] += right;
        for k in 1..n - 1 {
            let w = -1.0 / d[k - 1];
            d[k] += w;
            let prev = r[k - 1];
            r[k] -= w * prev;
        }
        let mut y = vec![c(0.0, 0.0); n + 1];
        y[0] = c(left, 0.0);
        y[n] = c(right, 0.0);
        y[n - 1] = r[n - 2] / d[n - 2];
        for k in (1..n - 1).rev() {
            y[k] = (r[k - 1] + y[k + 1]) / d[k - 1];
        }
        y
    };
    let (q0, ql) = (q(0.0) - lambda, q(length) - lambda);
    let mut out = [[c(0.0, 0.0); 2]; 2];
    for (col, y) in [solve(1.0, 0.0), solve(0.0, 1.0)].iter().enumerate() {
        out[0][col] = (y[1] - y[0]) / h - h / 2.0 * q0 * y[0];
        out[1][col] = (y[n - 1] - y[n]) / h - h / 2.0 * ql * y[n];
    }
    out
}

/// Weyl matrix of the discretised tree: Schur complement of the summed
/// edge maps onto the leaves.
fn fd_weyl(n: usize, rho: Complex64) -> DMatrix<Complex64> {
    let file = example("example1.json");
    let graph = file.graph().unwrap();
    let vertices = graph.vertices().to_vec();
    let pos = |v: usize| vertices.iter().position(|&u| u == v).unwrap();
    let mut a = DMatrix::<Complex64>::zeros(vertices.len(), vertices.len());
    for spec in &file.edges {
        let Some(PotentialSpec::Preset { preset }) = &spec.potential else {
            panic!("example edges use presets")
        };
        let p: Preset = preset.parse().unwrap();
        let d = edge_dtn(&|x| p.eval(x), spec.length, n, rho * rho);
        let ends = [pos(spec.a), pos(spec.b)];
        for r in 0..2 {
            for s in 0..2 {
                a[(ends[r], ends[s])] += d[r][s];
            }
        }
    }
    let leaves: Vec<usize> = graph.leaves().iter().map(|&v| pos(v)).collect();
    let inner: Vec<usize> = (0..vertices.len()).filter(|i| !leaves.contains(i)).collect();
    let pick = |rows: &[usize], cols: &[usize]| DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])]);
    let inner_solve = pick(&inner, &inner).lu().solve(&pick(&inner, &leaves)).unwrap();
    pick(&leaves, &leaves) - pick(&leaves, &inner) * inner_solve
}

#[test]
fn example_one_matches_finite_difference_oracle() {
    let rho = c(10f64.powf(0.5), 0.1);
    let (coarse, fine) = (fd_weyl(4000, rho), fd_weyl(8000, rho));
    let oracle = (&fine * c(4.0, 0.0) - &coarse) / c(3.0, 0.0);
    let got = model_of(&example("example1.json")).weyl(rho).unwrap();
    let rel = (&got - &oracle).norm() / oracle.norm();
    assert!(rel <= 1e-4, "relative deviation {rel:e}");
    // the extrapolation must actually improve on the raw scheme
    assert!(rel < (&got - &fine).norm() / oracle.norm());
}

#[test]
fn example_one_is_symmetric_on_the_default_grid() {
    let model = model_of(&example("example1.json"));
    let samples = model.sample(&RhoGridSpec::default().points()).unwrap();
    let mut worst = 0.0f64;
    for m in &samples.matrices {
        let big = |a: &DMatrix<Complex64>| a.iter().fold(0.0f64, |s, v| s.max(v.norm()));
        worst = worst.max(big(&(m - m.transpose())) / big(m));
    }
    assert!(worst <= 1e-6, "asymmetry {worst:e}");
}

#[test]
fn weyl_solutions_satisfy_vertex_and_leaf_conditions() {
    let model = model_of(&example("example1.json"));
    let graph = model.graph();
    let m = graph.leaf_count();
    for rho in [c(1.0, 0.1), c(7.3, 0.1), c(64.0, 0.1), c(100.0, 0.5)] {
        let sol = model.solve(rho).unwrap();
        let ends = model.end_values(rho);
        for i in 0..m {
            // value and derivative pointing away from `v` along edge position p
            let at = |p: usize, v: usize| -> (Complex64, Complex64) {
                let (ca, cb) = (sol.coeffs[(2 * p, i)], sol.coeffs[(2 * p + 1, i)]);
                if model.edges()[p].start == v {
                    (ca, cb)
                } else {
                    let e = &ends[p];
                    (ca * e.phi + cb * e.s, -(ca * e.dphi + cb * e.ds))
                }
            };
            for (j, &leaf) in graph.leaves().iter().enumerate() {
                let p = graph.edge_position(graph.leaf_edge(leaf).unwrap()).unwrap();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((at(p, leaf).0 - want).norm() <= 1e-10);
                assert!((at(p, leaf).1 - sol.matrix[(i, j)]).norm() <= 1e-12 * sol.matrix[(i, j)].norm());
            }
            for v in graph.internal_vertices() {
                let inc: Vec<(Complex64, Complex64)> = graph
                    .incident(v)
                    .iter()
                    .map(|&e| at(graph.edge_position(e).unwrap(), v))
                    .collect();
                let scale = inc.iter().fold(0.0f64, |s, w| s.max(w.1.norm()));
                let flux: Complex64 = inc.iter().map(|w| w.1).sum();
                assert!(flux.norm() <= 1e-8 * scale, "Kirchhoff at {v} for rho={rho}");
                for w in &inc[1..] {
                    assert!((w.0 - inc[0].0).norm() <= 1e-10 * inc[0].0.norm().max(1.0));
                }
            }
        }
    }
}

#[test]
fn single_sample_of_free_three_star() {
    let (g, data) = star(&[1.0; 3], |_, _| 0.0);
    let rho = c(1.0, 0.1);
    let samples = qtree::forward::ForwardModel::new(g, &data).unwrap().sample(&[rho]).unwrap();
    // vertex value is 1 / (3 cos rho)
    let diag = rho * (1.0 / (3.0 * rho.cos()) - rho.cos()) / rho.sin();
    let off = rho / (3.0 * rho.sin() * rho.cos());
    let m = &samples.matrices[0];
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { diag } else { off };
            assert!((m[(i, j)] - want).norm() <= 1e-12 * want.norm());
        }
    }
}

#[test]
fn default_grid_is_reproducible_and_survives_the_file_format() {
    let model = model_of(&example("example1.json"));
    let grid = RhoGridSpec::default().points();
    assert_eq!(grid.len(), 180);
    // log-uniform: about half the points lie below 10
    assert!(grid.iter().filter(|r| r.re < 10.0).count() > 60);
    let first = model.sample(&grid).unwrap();
    let second = model.sample(&grid).unwrap();
    let csv = first.to_csv();
    assert_eq!(csv, second.to_csv());
    let back = WeylSamples::from_csv(&csv).unwrap();
    assert_eq!(back.rhos, first.rhos);
    assert_eq!(back.matrices, first.matrices);
    assert_eq!(back.digest(), first.digest());
}
