//! Network parameters, initialization and the text weight format.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Weights of a stacked spectral GCN. `weights[l]` maps layer `l` inputs to
/// its outputs; `filter[l]` holds that layer's filter coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct GcnModel {
    pub weights: Vec<Array2<f64>>,
    pub filter: Vec<Vec<f64>>,
}

impl GcnModel {
    /// Glorot-initialized model with layer widths `dims[0] -> dims[1] -> ...`.
    pub fn init(dims: &[usize], filter_init: &[f64], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidInput(format!("invalid layer widths {dims:?}")));
        }
        let weights: Vec<_> = dims.windows(2).map(|w| glorot_with(w[0], w[1], rng)).collect();
        let filter = vec![filter_init.to_vec(); weights.len()];
        Ok(Self { weights, filter })
    }

    pub fn layers(&self) -> usize {
        self.weights.len()
    }

    pub fn theta1(&self) -> &Array2<f64> {
        &self.weights[0]
    }

    pub fn theta2(&self) -> Option<&Array2<f64>> {
        self.weights.get(1)
    }

    pub fn num_classes(&self) -> usize {
        self.weights.last().map_or(0, |w| w.ncols())
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|v| v.is_finite()))
            && self.filter.iter().flatten().all(|v| v.is_finite())
    }

    /// Text tensor file: a header line, then one `weights`/`filter` block per
    /// layer with its shape followed by row-major values.
    pub fn to_text(&self, seed: u64, config_hash: &str) -> String {
        let mut out = String::new();
        let shapes: Vec<String> = self.weights.iter().map(|w| format!("{}x{}", w.nrows(), w.ncols())).collect();
        let _ = writeln!(out, "# regfilter-model layers={} shapes={} seed={seed} config={config_hash}", self.layers(), shapes.join(","));
        for (l, (w, f)) in self.weights.iter().zip(&self.filter).enumerate() {
            let _ = writeln!(out, "weights {l} {} {}", w.nrows(), w.ncols());
            for row in w.rows() {
                let line: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
                let _ = writeln!(out, "{}", line.join(" "));
            }
            let line: Vec<String> = f.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(out, "filter {l} {}", f.len());
            let _ = writeln!(out, "{}", line.join(" "));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidInput(format!("model file: {msg}"));
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let mut weights = Vec::new();
        let mut filter = Vec::new();
        let parse_row = |line: Option<&str>, len: usize| -> Result<Vec<f64>> {
            let line = line.ok_or_else(|| bad("truncated".into()))?;
            let vals: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let vals = vals.map_err(|e| bad(format!("{e}")))?;
            if vals.len() != len {
                return Err(bad(format!("expected {len} values, found {}", vals.len())));
            }
            Ok(vals)
        };
        while let Some(header) = lines.next() {
            let parts: Vec<&str> = header.split_whitespace().collect();
            match parts.as_slice() {
                ["weights", _, r, c] => {
                    let (r, c): (usize, usize) = (r.parse().map_err(|_| bad(header.into()))?, c.parse().map_err(|_| bad(header.into()))?);
                    let mut data = Vec::with_capacity(r * c);
                    for _ in 0..r {
                        data.extend(parse_row(lines.next(), c)?);
                    }
                    weights.push(Array2::from_shape_vec((r, c), data).map_err(|e| bad(e.to_string()))?);
                }
                ["filter", _, k] => {
                    let k: usize = k.parse().map_err(|_| bad(header.into()))?;
                    filter.push(parse_row(lines.next(), k)?);
                }
                _ => return Err(bad(format!("unexpected line {header:?}"))),
            }
        }
        if weights.is_empty() || weights.len() != filter.len() {
            return Err(bad("missing blocks".into()));
        }
        Ok(Self { weights, filter })
    }

    pub fn save(&self, path: &Path, seed: u64, config_hash: &str) -> Result<()> {
        fs::write(path, self.to_text(seed, config_hash)).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Uniform samples in `+-sqrt(6 / (rows + cols))`, deterministic per seed.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Array2<f64> {
    glorot_with(rows, cols, &mut ChaCha8Rng::seed_from_u64(seed))
}

pub(crate) fn glorot_with(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-bound..=bound))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glorot_bounds_and_determinism() {
        let w = glorot_init(2, 4, 7);
        assert!(w.iter().all(|v| v.abs() <= 1.0));
        assert_eq!(w, glorot_init(2, 4, 7));
        assert_ne!(w, glorot_init(2, 4, 8));
    }

    #[test]
    fn glorot_mean_is_centered() {
        let w = glorot_init(1433, 32, 3);
        let bound = (6.0f64 / 1465.0).sqrt();
        let sigma = bound / 3f64.sqrt() / (w.len() as f64).sqrt();
        let mean = w.mean().unwrap();
        assert!(mean.abs() <= 3.0 * sigma, "{mean} vs {sigma}");
    }

    #[test]
    fn text_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = GcnModel::init(&[3, 4, 2], &[0.5, 1.5], &mut rng).unwrap();
        let text = m.to_text(1, "abc");
        assert!(text.starts_with("# regfilter-model layers=2 shapes=3x4,4x2 seed=1 config=abc"));
        assert_eq!(GcnModel::from_text(&text).unwrap(), m);
        assert!(GcnModel::from_text("weights 0 1 2\n1.0\n").is_err());
    }
}
