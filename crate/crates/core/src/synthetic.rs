//! Seeded contextual stochastic block model datasets.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Each class prefers its own block of edges and its own slice of binary
/// features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SbmParams {
    pub nodes: usize,
    pub classes: usize,
    pub features: usize,
    /// Expected number of neighbours inside the node's class.
    pub degree_in: f64,
    /// Expected number of neighbours outside the node's class.
    pub degree_out: f64,
    /// Probability of a feature from the node's own slice.
    pub feature_on: f64,
    /// Probability of any other feature.
    pub feature_noise: f64,
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SbmParams {
    fn default() -> Self {
        Self {
            nodes: 300,
            classes: 3,
            features: 60,
            degree_in: 4.0,
            degree_out: 1.0,
            feature_on: 0.12,
            feature_noise: 0.05,
            train_per_class: 5,
            val: 60,
            test: 120,
        }
    }
}

pub fn contextual_sbm(params: &SbmParams, seed: u64) -> Result<Dataset> {
    let p = params;
    if p.classes == 0 || p.nodes < p.classes || p.features < p.classes {
        return Err(Error::InvalidInput("need at least one node and one feature per class".into()));
    }
    if p.classes * p.train_per_class + p.val + p.test > p.nodes {
        return Err(Error::InvalidInput("split sizes exceed the node count".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..p.nodes).map(|i| i % p.classes).collect();
    let per_class = p.nodes as f64 / p.classes as f64;
    let p_in = (p.degree_in / (per_class - 1.0).max(1.0)).min(1.0);
    let p_out = (p.degree_out / (p.nodes as f64 - per_class).max(1.0)).min(1.0);

    let mut edges = Vec::new();
    for u in 0..p.nodes {
        for v in (u + 1)..p.nodes {
            let prob = if labels[u] == labels[v] { p_in } else { p_out };
            if rng.gen::<f64>() < prob {
                edges.push((u, v, 1.0));
            }
        }
    }
    let graph = Graph::from_edges(p.nodes, edges)?;

    let slice = p.features / p.classes;
    let mut x = Array2::zeros((p.nodes, p.features));
    for (i, &y) in labels.iter().enumerate() {
        for j in 0..p.features {
            let own = j / slice == y;
            let prob = if own { p.feature_on } else { p.feature_noise };
            if rng.gen::<f64>() < prob {
                x[[i, j]] = 1.0;
            }
        }
    }

    let mut order: Vec<usize> = (0..p.nodes).collect();
    order.shuffle(&mut rng);
    let mut train = Vec::new();
    let mut taken = vec![0usize; p.classes];
    let mut rest = Vec::new();
    for i in order {
        if taken[labels[i]] < p.train_per_class {
            taken[labels[i]] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    let val = rest[..p.val].to_vec();
    let test = rest[p.val..p.val + p.test].to_vec();
    let split = Split { train, val, test };
    Dataset::new(graph, x, labels.into_iter().map(Some).collect(), split)
}
