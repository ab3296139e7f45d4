use std::path::PathBuf;

/// Errors produced by the graph, spectral, filter and training routines.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("matrix is not symmetric (max |m_ij - m_ji| = {defect:e})")]
    Asymmetric { defect: f64 },

    #[error("exact path unavailable for n = {n} (dense cap {cap}), use a polynomial approximant")]
    TooLarge { n: usize, cap: usize },

    #[error("{what} did not converge after {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("frequency response has a pole at eigenvalue {lambda}")]
    Pole { lambda: f64 },

    #[error("invalid filter specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("{}:{line}: {msg}", file.display())]
    Parse {
        file: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}
