//! Undirected weighted graphs and their Laplacians.

use std::collections::{BTreeMap, VecDeque};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Undirected graph stored as a symmetric, non-negative weighted adjacency matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    adjacency: SparseMatrix,
}

impl Graph {
    /// Wraps an adjacency matrix after checking it is square, exactly
    /// symmetric and non-negative.
    pub fn new(adjacency: SparseMatrix) -> Result<Self> {
        if !adjacency.is_square() {
            return Err(Error::InvalidInput(format!(
                "adjacency must be square, got {}x{}",
                adjacency.n_rows(),
                adjacency.n_cols()
            )));
        }
        let defect = adjacency.symmetry_defect();
        if defect != 0.0 {
            return Err(Error::Asymmetric { defect });
        }
        if let Some((i, j, w)) = adjacency.iter().find(|&(_, _, w)| w < 0.0) {
            return Err(Error::InvalidInput(format!("negative weight {w} on edge ({i}, {j})")));
        }
        Ok(Self { adjacency })
    }

    /// Builds a graph from an undirected edge list. Each edge is stored in both
    /// directions; repeated edges (in either orientation) keep the largest weight.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut weights: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(Error::InvalidInput(format!("invalid weight {w} on edge ({u}, {v})")));
            }
            let key = (u.min(v), u.max(v));
            let slot = weights.entry(key).or_insert(w);
            *slot = slot.max(w);
        }
        let triplets = weights.into_iter().flat_map(|((u, v), w)| {
            if u == v {
                vec![(u, u, w)]
            } else {
                vec![(u, v, w), (v, u, w)]
            }
        });
        Self::new(SparseMatrix::from_triplets(n, n, triplets)?)
    }

    pub fn n(&self) -> usize {
        self.adjacency.n_rows()
    }

    pub fn adjacency(&self) -> &SparseMatrix {
        &self.adjacency
    }

    /// Number of undirected edges (self-loops count once).
    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&(i, j, _)| i <= j).count()
    }

    /// Undirected edges `(u, v, w)` with `u <= v`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().filter(|&(i, j, _)| i <= j)
    }

    /// Same graph with every node index remapped through `perm` (node `i`
    /// becomes `perm[i]`).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        if perm.len() != n {
            return Err(Error::DimensionMismatch {
                context: "node permutation",
                expected: n,
                found: perm.len(),
            });
        }
        let triplets = self.adjacency.iter().map(|(i, j, w)| (perm[i], perm[j], w));
        Self::new(SparseMatrix::from_triplets(n, n, triplets)?)
    }

    /// Hop distances from `source` by breadth-first search; `None` marks
    /// unreachable nodes.
    pub fn hop_distances(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n()];
        let mut queue = VecDeque::new();
        dist[source] = Some(0);
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or(0);
            for &v in self.adjacency.row(u).0 {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

/// Weighted degrees `d_i = sum_j w_ij`.
pub fn degree_vector(g: &Graph) -> Vec<f64> {
    g.adjacency.row_sums()
}

/// Combinatorial Laplacian `L = D - W`.
pub fn laplacian(g: &Graph) -> SparseMatrix {
    let degree = SparseMatrix::diagonal(&degree_vector(g));
    degree
        .add_scaled(1.0, &g.adjacency, -1.0)
        .expect("degree and adjacency share a shape")
}

/// Symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
///
/// Isolated nodes use `D^{-1/2}_ii = 0`, so their diagonal entry is 1.
pub fn normalized_laplacian(g: &Graph) -> SparseMatrix {
    sym_normalized(g.adjacency())
}

/// Normalized Laplacian of the graph after adding a unit self-loop to every
/// node (`W <- W + I`, degrees recomputed).
pub fn renormalize(g: &Graph) -> SparseMatrix {
    let n = g.n();
    let with_loops = g
        .adjacency
        .add_scaled(1.0, &SparseMatrix::identity(n), 1.0)
        .expect("square adjacency");
    sym_normalized(&with_loops)
}

fn sym_normalized(w: &SparseMatrix) -> SparseMatrix {
    let inv_sqrt: Vec<f64> = w
        .row_sums()
        .into_iter()
        .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    let scaled = w
        .scale_rows_cols(&inv_sqrt, &inv_sqrt)
        .expect("scaling vectors match the adjacency");
    scaled
        .shift_scaled(-1.0, 1.0)
        .expect("square adjacency")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn k2() -> Graph {
        Graph::from_edges(2, [(0, 1, 1.0)]).unwrap()
    }

    fn k3() -> Graph {
        Graph::from_edges(3, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)]).unwrap()
    }

    #[test]
    fn degrees() {
        assert_eq!(degree_vector(&k2()), vec![1.0, 1.0]);
        assert_eq!(degree_vector(&k3()), vec![2.0, 2.0, 2.0]);
        let lonely = Graph::from_edges(1, []).unwrap();
        assert_eq!(degree_vector(&lonely), vec![0.0]);
    }

    #[test]
    fn combinatorial_laplacian() {
        assert_eq!(laplacian(&k2()).to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
        let l3 = laplacian(&k3()).to_dense();
        let expected = array![[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]];
        assert_eq!(l3, expected);
        for s in laplacian(&k3()).row_sums() {
            assert!(s.abs() <= 1e-12);
        }
    }

    #[test]
    fn normalized_laplacian_small_cases() {
        assert_eq!(normalized_laplacian(&k2()).to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
        let lonely = Graph::from_edges(1, []).unwrap();
        assert_eq!(normalized_laplacian(&lonely).to_dense(), array![[1.0]]);
        let l3 = normalized_laplacian(&k3()).to_dense();
        assert!((l3[[0, 1]] + 0.5).abs() < 1e-15);
        assert!((l3[[0, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn renormalized_small_cases() {
        let r = renormalize(&k2()).to_dense();
        let expected = array![[0.5, -0.5], [-0.5, 0.5]];
        for (a, b) in r.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
        let lonely = Graph::from_edges(1, []).unwrap();
        assert_eq!(renormalize(&lonely).to_dense(), array![[0.0]]);
    }

    #[test]
    fn duplicate_edges_keep_max_weight() {
        let g = Graph::from_edges(2, [(0, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.adjacency().get(0, 1), 2.0);
        assert_eq!(g.adjacency().get(1, 0), 2.0);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edges(10, [(0, 99, 1.0)]).is_err());
        assert!(Graph::from_edges(2, [(0, 1, -1.0)]).is_err());
        let asym = SparseMatrix::from_triplets(2, 2, [(0, 1, 1.0)]).unwrap();
        assert!(matches!(Graph::new(asym), Err(Error::Asymmetric { .. })));
    }

    #[test]
    fn bfs_on_path() {
        let path = Graph::from_edges(4, [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        assert_eq!(path.hop_distances(0), vec![Some(0), Some(1), Some(2), Some(3)]);
        let split = Graph::from_edges(3, [(0, 1, 1.0)]).unwrap();
        assert_eq!(split.hop_distances(0)[2], None);
    }
}
