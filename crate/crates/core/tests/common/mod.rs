#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regfilter::{Graph, SparseMatrix};

/// Erdos-Renyi graph with weights in [0.5, 2).
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v, rng.gen_range(0.5..2.0)));
            }
        }
    }
    Graph::from_edges(n, edges).unwrap()
}

/// Random graph with a spanning path so every node is reachable.
pub fn connected_graph(n: usize, p: f64, seed: u64) -> Graph {
    let g = random_graph(n, p, seed);
    let extra = (0..n.saturating_sub(1)).map(|i| (i, i + 1, 1.0));
    Graph::from_edges(n, g.edges().chain(extra)).unwrap()
}

pub fn frob(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn to_nalgebra(m: &SparseMatrix) -> nalgebra::DMatrix<f64> {
    let d = m.to_dense();
    nalgebra::DMatrix::from_fn(d.nrows(), d.ncols(), |i, j| d[[i, j]])
}

pub fn sorted_eigenvalues_nalgebra(m: &SparseMatrix) -> Vec<f64> {
    let mut ev: Vec<f64> = to_nalgebra(m).symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}
