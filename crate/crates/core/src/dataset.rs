//! Node-classification datasets and their on-disk directory format.
//!
//! A dataset directory holds four UTF-8 files:
//!
//! ```text
//! graph.edges   src<TAB>dst<TAB>weight, 0-based ids, one undirected edge per line
//! features.csv  one row of comma-separated decimals per node
//! labels.csv    one integer class per node (-1 marks an unlabeled node)
//! split.json    {"train": [...], "val": [...], "test": [...]}
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const EDGES_FILE: &str = "graph.edges";
pub const FEATURES_FILE: &str = "features.csv";
pub const LABELS_FILE: &str = "labels.csv";
pub const SPLIT_FILE: &str = "split.json";

/// Train / validation / test node indices.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Graph, dense node features, labels and split.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Array2<f64>,
    /// `None` for nodes without a label.
    pub labels: Vec<Option<usize>>,
    pub split: Split,
    num_classes: usize,
}

impl Dataset {
    /// Checks the cross-field invariants: shapes agree, split sets are
    /// disjoint and in range, and every split node carries a label.
    pub fn new(
        graph: Graph,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        split: Split,
    ) -> Result<Self> {
        let n = graph.n();
        if features.nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "feature rows vs graph nodes",
                expected: n,
                found: features.nrows(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                context: "labels vs graph nodes",
                expected: n,
                found: labels.len(),
            });
        }
        let mut owner = vec![None::<&str>; n];
        for (name, set) in [("train", &split.train), ("val", &split.val), ("test", &split.test)] {
            for &i in set {
                if i >= n {
                    return Err(Error::InvalidInput(format!("{name} index {i} out of range (n = {n})")));
                }
                if let Some(other) = owner[i] {
                    return Err(Error::InvalidInput(format!("node {i} appears in both {other} and {name}")));
                }
                owner[i] = Some(name);
                if labels[i].is_none() {
                    return Err(Error::InvalidInput(format!("{name} node {i} has no label")));
                }
            }
        }
        let num_classes = labels.iter().flatten().max().map_or(0, |&c| c + 1);
        Ok(Self {
            graph,
            features,
            labels,
            split,
            num_classes,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Copy with node `i` moved to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let graph = self.graph.permuted(perm)?;
        let mut features = Array2::zeros(self.features.raw_dim());
        let mut labels = vec![None; n];
        for i in 0..n {
            features.row_mut(perm[i]).assign(&self.features.row(i));
            labels[perm[i]] = self.labels[i];
        }
        let map = |set: &[usize]| set.iter().map(|&i| perm[i]).collect();
        let split = Split {
            train: map(&self.split.train),
            val: map(&self.split.val),
            test: map(&self.split.test),
        };
        Self::new(graph, features, labels, split)
    }

    /// Same dataset with L1 row-normalized features.
    pub fn with_normalized_features(mut self) -> Self {
        self.features = row_normalize_features(&self.features);
        self
    }

    /// Writes the four dataset files into `dir`, creating it if needed.
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|source| io_err(dir, source))?;

        let mut edges = String::new();
        for (u, v, w) in self.graph.edges() {
            let _ = writeln!(edges, "{u}\t{v}\t{w}");
        }
        write_file(&dir.join(EDGES_FILE), &edges)?;

        let mut features = String::new();
        for row in self.features.rows() {
            let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            features.push_str(&line.join(","));
            features.push('\n');
        }
        write_file(&dir.join(FEATURES_FILE), &features)?;

        let mut labels = String::new();
        for l in &self.labels {
            match l {
                Some(c) => {
                    let _ = writeln!(labels, "{c}");
                }
                None => labels.push_str("-1\n"),
            }
        }
        write_file(&dir.join(LABELS_FILE), &labels)?;

        let split = serde_json::to_string(&self.split).expect("split serializes");
        write_file(&dir.join(SPLIT_FILE), &(split + "\n"))
    }
}

/// Reads a dataset directory; see the module docs for the format.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let features_path = dir.join(FEATURES_FILE);
    let features_text = read_file(&features_path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in lines(&features_text) {
        let row = line
            .split(',')
            .map(|tok| tok.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| parse_err(&features_path, lineno, format!("bad decimal: {e}")))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(parse_err(
                    &features_path,
                    lineno,
                    format!("expected {} columns, found {}", first.len(), row.len()),
                ));
            }
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(&features_path, lineno, "non-finite feature".into()));
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let features = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .expect("rows have equal length");

    let labels_path = dir.join(LABELS_FILE);
    let labels_text = read_file(&labels_path)?;
    let mut labels = Vec::with_capacity(n);
    for (lineno, line) in lines(&labels_text) {
        let value: i64 = line
            .trim()
            .parse()
            .map_err(|e| parse_err(&labels_path, lineno, format!("bad label: {e}")))?;
        match value {
            -1 => labels.push(None),
            v if v >= 0 => labels.push(Some(v as usize)),
            v => return Err(parse_err(&labels_path, lineno, format!("label {v} outside class range"))),
        }
        if labels.len() > n {
            return Err(parse_err(&labels_path, lineno, format!("more labels than the {n} feature rows")));
        }
    }
    if labels.len() != n {
        return Err(parse_err(
            &labels_path,
            labels_text.lines().count(),
            format!("expected {n} labels, found {}", labels.len()),
        ));
    }

    let edges_path = dir.join(EDGES_FILE);
    let edges_text = read_file(&edges_path)?;
    let mut edges = Vec::new();
    for (lineno, line) in lines(&edges_text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(parse_err(&edges_path, lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let node = |tok: &str| -> Result<usize> {
            let id: usize = tok
                .trim()
                .parse()
                .map_err(|e| parse_err(&edges_path, lineno, format!("bad node id {tok:?}: {e}")))?;
            if id >= n {
                return Err(parse_err(&edges_path, lineno, format!("node id {id} out of range (n = {n})")));
            }
            Ok(id)
        };
        let (u, v) = (node(fields[0])?, node(fields[1])?);
        let w: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|e| parse_err(&edges_path, lineno, format!("bad weight: {e}")))?;
        if !w.is_finite() || w < 0.0 {
            return Err(parse_err(&edges_path, lineno, format!("weight {w} must be finite and non-negative")));
        }
        if u == v {
            return Err(parse_err(&edges_path, lineno, format!("self-loop on node {u}")));
        }
        edges.push((u, v, w));
    }
    let graph = Graph::from_edges(n, edges)?;

    let split_path = dir.join(SPLIT_FILE);
    let split_text = read_file(&split_path)?;
    let split: Split = serde_json::from_str(&split_text).map_err(|e| Error::Parse {
        file: split_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;

    Dataset::new(graph, features, labels, split).map_err(|e| match e {
        Error::InvalidInput(msg) => Error::Parse {
            file: split_path,
            line: 1,
            msg,
        },
        other => other,
    })
}

/// Divides every non-zero row by its L1 norm; all-zero rows are left as is.
pub fn row_normalize_features(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let norm: f64 = row.iter().map(|v| v.abs()).sum();
        if norm > 0.0 {
            row.mapv_inplace(|v| v / norm);
        }
    }
    out
}

/// Non-empty lines with 1-based line numbers; a trailing `\r` is tolerated.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn read_file(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|source| io_err(path, source))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| io_err(path, source))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(file: &Path, line: usize, msg: String) -> Error {
    Error::Parse {
        file: PathBuf::from(file),
        line,
        msg,
    }
}
