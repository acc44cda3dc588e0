use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("factor spectrum covers eigenvalues up to {covered}, but cutoff {requested} was requested")]
    SpectrumTooShort { covered: f64, requested: f64 },

    #[error("symbol table has no key within tolerance of {0}")]
    RankLookupMiss(f64),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("gramian dimension {0} exceeds the supported maximum of {max}", max = crate::observability::MAX_GRAMIAN_DIM)]
    DimensionOverflow(usize),

    #[error("matrix is not positive semidefinite: smallest eigenvalue {lambda_min} (norm {norm})")]
    NotPositiveSemidefinite { lambda_min: f64, norm: f64 },

    #[error("eigen-solver failed to converge")]
    EigenFailure,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("manifold mismatch: {0}")]
    ManifoldMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
