//! Conversion of LINQS citation files (`*.content`, `*.cites`).

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use anyhow::{bail, Context};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regfilter::{Dataset, Graph, Split};

/// Sizes of a Planetoid-style split.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SplitSizes {
    pub train_per_class: usize,
    pub val: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        Self { train_per_class: 20, val: 500, test: 1000 }
    }
}

/// Counts of what the conversion dropped.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConvertStats {
    pub nodes: usize,
    pub edges: usize,
    pub dangling_citations: usize,
    pub self_citations: usize,
}

/// Parses a `.content` file (id, binary features, class) and a `.cites`
/// file (cited id, citing id) into an undirected unweighted dataset.
///
/// Classes are numbered in sorted name order. Citations naming unknown
/// papers and self-citations are dropped.
pub fn linqs_dataset(content: &str, cites: &str, sizes: SplitSizes, seed: u64) -> anyhow::Result<(Dataset, ConvertStats)> {
    let mut ids = HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut class_names = Vec::new();
    for (lineno, line) in content.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() < 3 {
            bail!("content line {}: expected id, features and class", lineno + 1);
        }
        let features = fields[1..fields.len() - 1]
            .iter()
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("content line {}: bad feature value", lineno + 1))?;
        if let Some(first) = rows.first() {
            if first.len() != features.len() {
                bail!("content line {}: {} features, expected {}", lineno + 1, features.len(), first.len());
            }
        }
        if ids.insert(fields[0].to_string(), rows.len()).is_some() {
            bail!("content line {}: duplicate paper id {}", lineno + 1, fields[0]);
        }
        rows.push(features);
        class_names.push(fields[fields.len() - 1].to_string());
    }
    if rows.is_empty() {
        bail!("content file has no papers");
    }
    let classes: BTreeMap<&str, usize> = class_names
        .iter()
        .map(String::as_str)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c, i))
        .collect();
    let labels: Vec<usize> = class_names.iter().map(|c| classes[c.as_str()]).collect();

    let mut stats = ConvertStats { nodes: rows.len(), ..ConvertStats::default() };
    let mut edges = BTreeSet::new();
    for (lineno, line) in cites.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != 2 {
            bail!("cites line {}: expected two paper ids", lineno + 1);
        }
        match (ids.get(fields[0]), ids.get(fields[1])) {
            (Some(&u), Some(&v)) if u == v => stats.self_citations += 1,
            (Some(&u), Some(&v)) => {
                edges.insert((u.min(v), u.max(v)));
            }
            _ => stats.dangling_citations += 1,
        }
    }
    stats.edges = edges.len();
    let graph = Graph::from_edges(rows.len(), edges.into_iter().map(|(u, v)| (u, v, 1.0)))?;

    let d = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let x = ndarray::Array2::from_shape_vec((stats.nodes, d), flat)?;
    let split = seeded_split(&labels, classes.len(), sizes, seed)?;
    let ds = Dataset::new(graph, x, labels.into_iter().map(Some).collect(), split)?;
    Ok((ds, stats))
}

/// `train_per_class` nodes of each class for training, then `val` and
/// `test` nodes from the remaining ones, all in one seeded shuffle.
pub fn seeded_split(labels: &[usize], classes: usize, sizes: SplitSizes, seed: u64) -> anyhow::Result<Split> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut taken = vec![0usize; classes];
    let mut train = Vec::new();
    let mut rest = Vec::new();
    for i in order {
        if taken[labels[i]] < sizes.train_per_class {
            taken[labels[i]] += 1;
            train.push(i);
        } else {
            rest.push(i);
        }
    }
    if let Some(c) = taken.iter().position(|&t| t < sizes.train_per_class) {
        bail!("class {c} has fewer than {} nodes", sizes.train_per_class);
    }
    if rest.len() < sizes.val + sizes.test {
        bail!("only {} nodes left for {} validation and {} test nodes", rest.len(), sizes.val, sizes.test);
    }
    train.sort_unstable();
    let mut val = rest[..sizes.val].to_vec();
    let mut test = rest[sizes.val..sizes.val + sizes.test].to_vec();
    val.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, val, test })
}

pub fn convert_files(content: &Path, cites: &Path, out: &Path, sizes: SplitSizes, seed: u64) -> anyhow::Result<ConvertStats> {
    let read = |p: &Path| std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()));
    let (ds, stats) = linqs_dataset(&read(content)?, &read(cites)?, sizes, seed)?;
    ds.save(out)?;
    Ok(stats)
}
