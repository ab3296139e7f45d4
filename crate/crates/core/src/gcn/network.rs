//! Forward pass, loss and reverse-mode gradients.
//!
//! Layer `l` computes `O_l = sum_j c_lj B_j (D_l(H_{l-1}) W_l)` where `D_l`
//! is inverted dropout, followed by ReLU on hidden layers and a row softmax
//! on the last one.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::GcnModel;
use super::propagation::{frobenius_inner, Propagation};
use crate::error::{check_dim, Error, Result};
use crate::sparse::SparseMatrix;

/// Floor applied to predicted probabilities inside the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// Node features as stored for the first layer. Sparse inputs drop only
/// their stored entries.
#[derive(Clone, Debug, PartialEq)]
pub enum Input {
    Sparse(SparseMatrix),
    Dense(Array2<f64>),
}

impl Input {
    /// Sparse storage when at most `max_density` of the entries are nonzero.
    pub fn from_features(x: &Array2<f64>, max_density: f64) -> Self {
        let nnz = x.iter().filter(|v| **v != 0.0).count();
        if (nnz as f64) <= max_density * x.len() as f64 {
            Input::Sparse(SparseMatrix::from_dense(x.view()))
        } else {
            Input::Dense(x.clone())
        }
    }

    pub fn n_rows(&self) -> usize {
        match self {
            Input::Sparse(m) => m.n_rows(),
            Input::Dense(m) => m.nrows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Input::Sparse(m) => m.n_cols(),
            Input::Dense(m) => m.ncols(),
        }
    }

    /// Number of entries subject to dropout.
    pub fn stored(&self) -> usize {
        match self {
            Input::Sparse(m) => m.nnz(),
            Input::Dense(m) => m.len(),
        }
    }

    fn masked(&self, mask: &[f64]) -> Result<Self> {
        check_dim("input dropout mask", self.stored(), mask.len())?;
        Ok(match self {
            Input::Sparse(x) => {
                let values: Vec<f64> = x.values().iter().zip(mask).map(|(v, m)| v * m).collect();
                Input::Sparse(x.with_values(values)?)
            }
            Input::Dense(x) => {
                let mut out = x.clone();
                out.iter_mut().zip(mask).for_each(|(v, m)| *v *= m);
                Input::Dense(out)
            }
        })
    }

    fn mul(&self, w: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Input::Sparse(x) => x.mul_dense(w.view()),
            Input::Dense(x) => Ok(x.dot(w)),
        }
    }

    fn tr_mul(&self, g: &Array2<f64>) -> Result<Array2<f64>> {
        match self {
            Input::Sparse(x) => x.tr_mul_dense(g.view()),
            Input::Dense(x) => Ok(x.t().dot(g)),
        }
    }
}

/// Inverted-dropout multipliers: `0` for dropped entries, `1 / keep` otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    /// One multiplier per entry of [`Input::stored`].
    pub input: Vec<f64>,
    /// One dense mask per hidden activation feeding layers `1..`.
    pub hidden: Vec<Array2<f64>>,
}

impl DropoutMasks {
    pub fn sample(drop: f64, x: &Input, model: &GcnModel, rng: &mut ChaCha8Rng) -> Self {
        let keep = 1.0 - drop;
        let mut draw = || if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 };
        let input = (0..x.stored()).map(|_| draw()).collect();
        let n = x.n_rows();
        let hidden = model.weights[1..]
            .iter()
            .map(|w| Array2::from_shape_simple_fn((n, w.nrows()), &mut draw))
            .collect();
        Self { input, hidden }
    }
}

/// Intermediates kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    /// Layer inputs after dropout.
    pub input0: Input,
    pub inputs: Vec<Array2<f64>>,
    /// `B_j A_l` for every layer and term.
    pub term_outputs: Vec<Vec<Array2<f64>>>,
    /// Pre-activations `O_l`.
    pub pre: Vec<Array2<f64>>,
    /// Row-softmax output.
    pub z: Array2<f64>,
}

pub fn softmax_rows(o: &Array2<f64>) -> Array2<f64> {
    let mut z = o.clone();
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    z
}

/// Runs the network. `masks = None` disables dropout.
pub fn forward(prop: &Propagation, x: &Input, model: &GcnModel, masks: Option<&DropoutMasks>) -> Result<ForwardCache> {
    check_dim("feature columns vs first layer", model.weights[0].nrows(), x.n_cols())?;
    let layers = model.layers();
    let input0 = match masks {
        Some(m) => x.masked(&m.input)?,
        None => x.clone(),
    };
    let mut inputs = Vec::with_capacity(layers - 1);
    let mut term_outputs = Vec::with_capacity(layers);
    let mut pre: Vec<Array2<f64>> = Vec::with_capacity(layers);
    for l in 0..layers {
        let a = if l == 0 {
            input0.mul(&model.weights[0])?
        } else {
            let mut h = pre[l - 1].mapv(|v: f64| v.max(0.0));
            if let Some(m) = masks {
                h *= &m.hidden[l - 1];
            }
            check_dim("hidden width", model.weights[l].nrows(), h.ncols())?;
            let a = h.dot(&model.weights[l]);
            inputs.push(h);
            a
        };
        let outs = prop.apply_terms(a.view())?;
        let mut o = Array2::zeros(a.raw_dim());
        for (out, &c) in outs.iter().zip(&model.filter[l]) {
            o.scaled_add(c, out);
        }
        if o.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("layer {l} activation")));
        }
        term_outputs.push(outs);
        pre.push(o);
    }
    let z = softmax_rows(pre.last().expect("at least one layer"));
    Ok(ForwardCache {
        input0,
        inputs,
        term_outputs,
        pre,
        z,
    })
}

/// `-sum_{i in idx} ln max(Z_{i y_i}, floor)`.
pub fn cross_entropy(z: &Array2<f64>, labels: &[Option<usize>], idx: &[usize]) -> f64 {
    idx.iter()
        .map(|&i| {
            let y = labels[i].expect("split nodes are labeled");
            -z[[i, y]].max(PROB_FLOOR).ln()
        })
        .sum()
}

/// Summed cross-entropy over `train` plus `weight_decay / 2 ||W_1||_F^2`.
pub fn loss(z: &Array2<f64>, labels: &[Option<usize>], train: &[usize], model: &GcnModel, weight_decay: f64) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::InvalidInput("training set is empty".into()));
    }
    let decay = 0.5 * weight_decay * model.weights[0].iter().map(|v| v * v).sum::<f64>();
    Ok(cross_entropy(z, labels, train) + decay)
}

/// Gradients with the same layout as [`GcnModel`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub filter: Vec<Vec<f64>>,
}

/// Reverse-mode gradient of [`loss`] for the pass recorded in `cache`.
pub fn backward(
    prop: &Propagation,
    model: &GcnModel,
    cache: &ForwardCache,
    masks: Option<&DropoutMasks>,
    labels: &[Option<usize>],
    train: &[usize],
    weight_decay: f64,
) -> Result<Gradients> {
    let layers = model.layers();
    let mut g = Array2::zeros(cache.z.raw_dim());
    for &i in train {
        let y = labels[i].expect("split nodes are labeled");
        if cache.z[[i, y]] < PROB_FLOOR {
            continue;
        }
        let mut row = g.row_mut(i);
        row.assign(&cache.z.row(i));
        row[y] -= 1.0;
    }
    let mut weights = vec![Array2::zeros((0, 0)); layers];
    let mut filter = vec![Vec::new(); layers];
    for l in (0..layers).rev() {
        filter[l] = cache.term_outputs[l].iter().map(|out| frobenius_inner(&g, out)).collect();
        let da = prop.combine(&model.filter[l], g.view())?;
        if l == 0 {
            let mut dw = cache.input0.tr_mul(&da)?;
            dw.scaled_add(weight_decay, &model.weights[0]);
            weights[0] = dw;
        } else {
            weights[l] = cache.inputs[l - 1].t().dot(&da);
            let mut dh = da.dot(&model.weights[l].t());
            if let Some(m) = masks {
                dh *= &m.hidden[l - 1];
            }
            let relu = cache.pre[l - 1].mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
            g = dh * relu;
        }
    }
    Ok(Gradients { weights, filter })
}

/// Row argmax with ties going to the lowest class index.
pub fn predictions(z: &Array2<f64>) -> Vec<usize> {
    z.axis_iter(Axis(0))
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

/// Fraction of `idx` whose argmax prediction matches the label.
pub fn accuracy(z: &Array2<f64>, labels: &[Option<usize>], idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let pred = predictions(z);
    let hits = idx.iter().filter(|&&i| labels[i] == Some(pred[i])).count();
    hits as f64 / idx.len() as f64
}
