//! Two-layer spectral graph convolutional network trained from scratch.

pub mod adam;
pub mod model;
pub mod network;
pub mod propagation;
pub mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use model::{glorot_init, GcnModel};
pub use network::{accuracy, backward, forward, loss, predictions, DropoutMasks, ForwardCache, Gradients, Input};
pub use propagation::{fixed_propagation, learned_propagation, LaplacianChoice, Operator, Propagation};
pub use train::{
    config_hash, decoupled_experiment, decoupled_with, fit, mlp_train, train, train_with, TrainConfig, TrainReport,
};
