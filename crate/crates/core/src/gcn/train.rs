//! Full-batch training with Adam and early stopping.

use std::fmt::Write as _;
use std::time::Instant;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::{adam_step, AdamConfig, AdamState};
use super::model::GcnModel;
use super::network::{accuracy, backward, cross_entropy, forward, loss, DropoutMasks, Input};
use super::propagation::{fixed_propagation, learned_propagation, LaplacianChoice, Propagation};
use crate::dataset::{row_normalize_features, Dataset, Split};
use crate::error::{Error, Result};
use crate::response::FilterSpec;

/// Features denser than this are stored densely.
const SPARSE_INPUT_DENSITY: f64 = 0.25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Epochs without a new best validation loss before stopping.
    /// `usize::MAX` disables early stopping.
    pub patience: usize,
    /// Drop probability of inverted dropout; `0` disables it.
    pub dropout: f64,
    /// L2 factor on the first layer weights.
    pub weight_decay: f64,
    pub hidden: usize,
    /// Number of graph convolution layers (1 to 3).
    pub layers: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub laplacian: LaplacianChoice,
    pub normalize_features: bool,
    pub learn_filter: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            max_epochs: 200,
            patience: 10,
            dropout: 0.5,
            weight_decay: 5e-4,
            hidden: 32,
            layers: 2,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            laplacian: LaplacianChoice::PerFamily,
            normalize_features: true,
            learn_filter: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(format!("train config: {msg}")));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if self.max_epochs == 0 || self.hidden == 0 {
            return bad("max_epochs and hidden must be positive");
        }
        if !(1..=3).contains(&self.layers) {
            return bad("layers must be 1, 2 or 3");
        }
        if !(self.weight_decay >= 0.0) {
            return bad("weight_decay must be non-negative");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
        }
    }

    fn dims(&self, d: usize, classes: usize) -> Vec<usize> {
        let mut dims = vec![d];
        dims.extend(std::iter::repeat(self.hidden).take(self.layers - 1));
        dims.push(classes);
        dims
    }
}

/// Hex SHA-256 prefix identifying a (config, filter) pair.
pub fn config_hash(cfg: &TrainConfig, spec: Option<&FilterSpec>) -> String {
    let mut hasher = Sha256::new();
    hasher.update(serde_json::to_vec(cfg).expect("config serializes"));
    if let Some(spec) = spec {
        hasher.update(serde_json::to_vec(spec).expect("spec serializes"));
    }
    hasher.finalize().iter().take(8).fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub train_loss: Vec<f64>,
    /// Mean cross-entropy over the validation nodes.
    pub val_loss: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub epoch_seconds: Vec<f64>,
    /// Filter coefficients per layer at the end of training.
    pub filter: Vec<Vec<f64>>,
}

impl TrainReport {
    /// `epoch,train_loss,val_loss,val_acc` rows and a `#` summary line.
    /// Timing is left out so identical runs give identical files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_acc\n");
        for e in 0..self.epochs_run {
            let _ = writeln!(out, "{},{},{},{}", e + 1, self.train_loss[e], self.val_loss[e], self.val_acc[e]);
        }
        let _ = writeln!(
            out,
            "# epochs_run={} train_accuracy={} val_accuracy={} test_accuracy={}",
            self.epochs_run, self.train_accuracy, self.val_accuracy, self.test_accuracy
        );
        out
    }

    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epoch_seconds.is_empty() {
            0.0
        } else {
            self.epoch_seconds.iter().sum::<f64>() / self.epoch_seconds.len() as f64
        }
    }

    /// Copy with wall-clock timings cleared, for run-to-run comparison.
    pub fn without_timing(&self) -> Self {
        Self {
            epoch_seconds: Vec::new(),
            ..self.clone()
        }
    }
}

/// Trains on `x` with the given propagation.
pub fn fit(
    x: &Input,
    labels: &[Option<usize>],
    split: &Split,
    classes: usize,
    prop: &Propagation,
    cfg: &TrainConfig,
) -> Result<(TrainReport, GcnModel)> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut drop_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    drop_rng.set_stream(1);

    let mut model = GcnModel::init(&cfg.dims(x.n_cols(), classes), &prop.init, &mut init_rng)?;
    let adam = cfg.adam();
    let mut weight_state: Vec<AdamState> = model.weights.iter().map(|w| AdamState::new(w.len())).collect();
    let mut filter_state: Vec<AdamState> = model.filter.iter().map(|f| AdamState::new(f.len())).collect();

    let mut report = TrainReport {
        epochs_run: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        val_acc: Vec::new(),
        train_accuracy: 0.0,
        val_accuracy: 0.0,
        test_accuracy: 0.0,
        epoch_seconds: Vec::new(),
        filter: Vec::new(),
    };
    let mut best = f64::INFINITY;
    let mut stale = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let masks = (cfg.dropout > 0.0).then(|| DropoutMasks::sample(cfg.dropout, x, &model, &mut drop_rng));
        let cache = forward(prop, x, &model, masks.as_ref())?;
        let train_loss = loss(&cache.z, labels, &split.train, &model, cfg.weight_decay)?;
        if !train_loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        let grads = backward(prop, &model, &cache, masks.as_ref(), labels, &split.train, cfg.weight_decay)?;
        let t = epoch as u32;
        for ((w, g), s) in model.weights.iter_mut().zip(&grads.weights).zip(&mut weight_state) {
            let w = w.as_slice_mut().expect("standard layout");
            adam_step(w, g.as_slice().expect("standard layout"), s, t, &adam);
        }
        if prop.learnable && cfg.learn_filter {
            for ((c, g), s) in model.filter.iter_mut().zip(&grads.filter).zip(&mut filter_state) {
                adam_step(c, g, s, t, &adam);
            }
        }

        let eval = forward(prop, x, &model, None)?;
        let (val_loss, val_acc) = if split.val.is_empty() {
            (0.0, 0.0)
        } else {
            (
                cross_entropy(&eval.z, labels, &split.val) / split.val.len() as f64,
                accuracy(&eval.z, labels, &split.val),
            )
        };
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        report.val_acc.push(val_acc);
        report.epoch_seconds.push(start.elapsed().as_secs_f64());
        report.epochs_run = epoch;

        if split.val.is_empty() {
            continue;
        }
        if val_loss < best {
            best = val_loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                break;
            }
        }
    }

    let z = forward(prop, x, &model, None)?.z;
    report.train_accuracy = accuracy(&z, labels, &split.train);
    report.val_accuracy = accuracy(&z, labels, &split.val);
    report.test_accuracy = accuracy(&z, labels, &split.test);
    report.filter = model.filter.clone();
    Ok((report, model))
}

fn prepared_features(ds: &Dataset, cfg: &TrainConfig) -> Array2<f64> {
    if cfg.normalize_features {
        row_normalize_features(&ds.features)
    } else {
        ds.features.clone()
    }
}

/// Trains the spectral GCN with a learned filter of the given family.
pub fn train(ds: &Dataset, spec: &FilterSpec, cfg: &TrainConfig) -> Result<(TrainReport, GcnModel)> {
    let prop = learned_propagation(spec, &ds.graph, cfg.laplacian)?;
    train_with(ds, &prop, cfg)
}

pub fn train_with(ds: &Dataset, prop: &Propagation, cfg: &TrainConfig) -> Result<(TrainReport, GcnModel)> {
    let x = Input::from_features(&prepared_features(ds, cfg), SPARSE_INPUT_DENSITY);
    fit(&x, &ds.labels, &ds.split, ds.num_classes(), prop, cfg)
}

/// The same recipe without graph structure.
pub fn mlp_train(ds: &Dataset, layers: usize, cfg: &TrainConfig) -> Result<TrainReport> {
    let cfg = TrainConfig { layers, ..cfg.clone() };
    Ok(train_with(ds, &Propagation::identity(), &cfg)?.0)
}

/// Filters the features once with the fixed filter, then trains an MLP on
/// the result.
pub fn decoupled_experiment(ds: &Dataset, spec: &FilterSpec, cfg: &TrainConfig) -> Result<TrainReport> {
    let prop = fixed_propagation(spec, &ds.graph, cfg.laplacian)?;
    decoupled_with(ds, &prop, cfg)
}

pub fn decoupled_with(ds: &Dataset, prop: &Propagation, cfg: &TrainConfig) -> Result<TrainReport> {
    let filtered = prop.apply_fixed(prepared_features(ds, cfg).view())?;
    let x = Input::from_features(&filtered, SPARSE_INPUT_DENSITY);
    Ok(fit(&x, &ds.labels, &ds.split, ds.num_classes(), &Propagation::identity(), cfg)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use ndarray::array;

    fn two_nodes() -> Dataset {
        let g = Graph::from_edges(2, [(0, 1, 1.0)]).unwrap();
        let split = Split {
            train: vec![0, 1],
            val: vec![],
            test: vec![],
        };
        Dataset::new(g, array![[1.0, 0.0], [0.0, 1.0]], vec![Some(0), Some(1)], split).unwrap()
    }

    #[test]
    fn separable_toy_reaches_full_accuracy() {
        let cfg = TrainConfig {
            dropout: 0.0,
            ..TrainConfig::default()
        };
        let (rep, _) = train_with(&two_nodes(), &Propagation::identity(), &cfg).unwrap();
        assert_eq!(rep.train_accuracy, 1.0);
        assert!(rep.epochs_run <= 200);
        let one = mlp_train(&two_nodes(), 1, &cfg).unwrap();
        assert_eq!(one.train_accuracy, 1.0);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = TrainConfig { max_epochs: 30, ..TrainConfig::default() };
        let a = train(&two_nodes(), &FilterSpec::diffusion(1.0), &cfg).unwrap().0;
        let b = train(&two_nodes(), &FilterSpec::diffusion(1.0), &cfg).unwrap().0;
        assert_eq!(a.without_timing(), b.without_timing());
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn no_validation_runs_all_epochs() {
        let cfg = TrainConfig { max_epochs: 17, ..TrainConfig::default() };
        let rep = mlp_train(&two_nodes(), 2, &cfg).unwrap();
        assert_eq!(rep.epochs_run, 17);
        assert!(rep.to_csv().starts_with("epoch,train_loss,val_loss,val_acc\n1,"));
    }

    #[test]
    fn config_validation() {
        let ok = TrainConfig::default();
        assert!(ok.validate().is_ok());
        assert!(TrainConfig { learning_rate: 0.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { dropout: 1.0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { patience: 0, ..ok.clone() }.validate().is_err());
        assert!(TrainConfig { layers: 4, ..ok.clone() }.validate().is_err());
        assert_eq!(config_hash(&ok, None).len(), 16);
        assert_ne!(config_hash(&ok, None), config_hash(&TrainConfig { seed: 1, ..ok }, None));
    }
}
