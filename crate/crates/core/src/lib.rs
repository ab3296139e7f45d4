//! Spectral graph filters derived from regularization functionals, and a
//! small graph convolutional network engine that trains with them.

pub mod dataset;
pub mod error;
pub mod filters;
pub mod gcn;
pub mod graph;
pub mod response;
pub mod sparse;
pub mod spectral;
pub mod synthetic;

pub use dataset::{load_dataset, Dataset, Split};
pub use error::{Error, Result};
pub use filters::{exact_filter, FilterMatrix};
pub use graph::{degree_vector, laplacian, normalized_laplacian, renormalize, Graph};
pub use response::{check_monotone_increasing, frequency_response, regularization_fn, Family, FilterSpec};
pub use sparse::SparseMatrix;
pub use spectral::{eigendecompose, gft, igft, EigenSystem};
pub use synthetic::{contextual_sbm, SbmParams};
