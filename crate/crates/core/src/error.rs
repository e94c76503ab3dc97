use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, AmgError>;

#[derive(Debug, Error)]
pub enum AmgError {
    #[error("dimension mismatch in {op}: expected {expected}, got {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid matrix structure: {0}")]
    InvalidStructure(String),

    #[error("index ({row}, {col}) outside shape {n_rows}x{n_cols}")]
    IndexOutOfBounds {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("aggregate {aggregate} has an all-zero near-null-space restriction")]
    ZeroAggregate { aggregate: usize },

    #[error("singular coarse matrix: zero pivot at index {pivot}")]
    SingularMatrix { pivot: usize },

    #[error("sparsity pattern changed (cached nnz {expected}, got {found}); rebuild the Galerkin cache")]
    PatternChanged { expected: usize, found: usize },

    #[error("hierarchy was built without reusable Galerkin caches")]
    NoCache,

    #[error("matrix is not positive definite (p'Ap = {curvature:e} at iteration {iteration}); use fgmres")]
    Indefinite { iteration: usize, curvature: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("empty vector")]
    EmptyVector,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl AmgError {
    pub(crate) fn dim(op: &'static str, expected: usize, found: usize) -> Self {
        AmgError::DimensionMismatch {
            op,
            expected,
            found,
        }
    }
}
