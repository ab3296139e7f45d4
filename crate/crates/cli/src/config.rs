//! Experiment configuration files and hyperparameter grids.

use std::path::{Path, PathBuf};

use regfilter::gcn::TrainConfig;
use regfilter::{Family, FilterSpec};
use serde::Deserialize;

use crate::UsageError;

/// Hyperparameter lists swept by `train` and `decouple`.
///
/// Unset lists fall back to the family defaults. Only the lists relevant
/// to a family contribute to its grid.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub s: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub p: Option<Vec<u32>>,
    pub k: Option<Vec<usize>>,
    pub hidden: Option<Vec<usize>>,
    pub dropout: Option<Vec<f64>>,
    /// Filter coefficients, not swept.
    pub theta: Option<Vec<f64>>,
}

impl Grid {
    /// Replaces every list that `other` sets.
    pub fn overlay(&mut self, other: Grid) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(s, a, p, k, hidden, dropout, theta);
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        let empty = |name: &str, len: Option<usize>| match len {
            Some(0) => Err(UsageError(format!("grid list `{name}` is empty"))),
            _ => Ok(()),
        };
        empty("s", self.s.as_ref().map(Vec::len))?;
        empty("a", self.a.as_ref().map(Vec::len))?;
        empty("p", self.p.as_ref().map(Vec::len))?;
        empty("K", self.k.as_ref().map(Vec::len))?;
        empty("hidden", self.hidden.as_ref().map(Vec::len))?;
        empty("dropout", self.dropout.as_ref().map(Vec::len))?;
        empty("theta", self.theta.as_ref().map(Vec::len))?;
        Ok(())
    }

    /// Filter specs for one family, outer loop first: `s`, `a`, `p`, `K`.
    pub fn specs(&self, family: Family) -> Result<Vec<FilterSpec>, UsageError> {
        self.validate()?;
        let base = FilterSpec::new(family);
        let base = match &self.theta {
            Some(t) => base.with_theta(t.clone()),
            None => base,
        };
        let one = |v: f64| vec![v];
        let s = self.s.clone().unwrap_or_else(|| one(base.s));
        let a = self.a.clone().unwrap_or_else(|| one(base.a));
        let p = self.p.clone().unwrap_or_else(|| vec![base.p]);
        let k = self.k.clone().unwrap_or_else(|| vec![base.k]);
        let (uses_s, uses_ap, uses_k) = match family {
            Family::RegularizedLaplacian => (true, false, false),
            Family::Diffusion | Family::GraphHeat => (true, false, true),
            Family::PStepRandomWalk => (false, true, false),
            Family::Cosine | Family::Igcn => (false, false, true),
            Family::ChebyNet => (false, false, self.theta.is_none()),
            Family::Gcn => (false, false, false),
        };
        let pick = |on: bool, list: Vec<f64>, default: f64| if on { list } else { vec![default] };
        let s = pick(uses_s, s, base.s);
        let a = pick(uses_ap, a, base.a);
        let mut out = Vec::new();
        for &s in &s {
            for &a in &a {
                for &p in if uses_ap { &p[..] } else { std::slice::from_ref(&base.p) } {
                    for &k in if uses_k { &k[..] } else { std::slice::from_ref(&base.k) } {
                        let mut spec = FilterSpec { s, a, p, k, ..base.clone() };
                        if family == Family::ChebyNet && self.theta.is_none() {
                            spec = spec.with_theta(vec![1.0; k]);
                        }
                        spec.validate().map_err(|e| UsageError(e.to_string()))?;
                        out.push(spec);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Contents of an experiment file; every field may also be given as a flag.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    /// Filter families (or `mlp`, `identity`); `train` uses the first.
    pub filters: Vec<String>,
    pub seeds: Option<usize>,
    /// Root seed; run `i` uses `seed + i`.
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub renormalize: Option<bool>,
    pub grid: Grid,
    pub train: TrainConfig,
}

pub const DEFAULT_SEEDS: usize = 10;

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        Ok(toml::from_str(&text).map_err(|e| UsageError(format!("config {}: {e}", path.display())))?)
    }

    pub fn seeds(&self) -> usize {
        self.seeds.unwrap_or(DEFAULT_SEEDS)
    }

    pub fn root_seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }
}
