use thiserror::Error;

/// Errors raised by the decomposition library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("FCIDUMP parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("operator is not Hermitian: imaginary coefficient {0:e} survives merging")]
    NonHermitian(f64),

    #[error("determinant space of dimension {dim} exceeds the capacity limit {limit}")]
    Capacity { dim: usize, limit: usize },

    #[error("density matrix is not a mean-field projector (idempotency error {0:e})")]
    InvalidMeanField(f64),

    #[error("root not bracketed: N({lo}) = {n_lo}, N({hi}) = {n_hi}, target {target}")]
    Bracket {
        lo: f64,
        n_lo: f64,
        hi: f64,
        n_hi: f64,
        target: f64,
    },

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("missing dimer energy for fragment pair ({0}, {1})")]
    MissingPair(usize, usize),
}

pub type Result<T> = std::result::Result<T, Error>;
