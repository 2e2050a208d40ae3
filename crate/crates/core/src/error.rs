use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("duplicate entry at ({row}, {col})")]
    DuplicateEntry { row: usize, col: usize },
    #[error("negative value at ({row}, {col})")]
    NegativeValue { row: usize, col: usize },
    #[error("non-finite value at ({row}, {col})")]
    NonFiniteValue { row: usize, col: usize },
    #[error("index ({row}, {col}) out of range for {n_rows}x{n_cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },
    #[error("matrix has no stored entries")]
    EmptyMatrix,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite scaling vector entry")]
    NonFiniteScaling,
    #[error("invalid target marginals: {0}")]
    InvalidTargets(String),
    #[error("exponent {0} exceeds the overflow limit")]
    Overflow(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("matrix is not symmetric diagonally dominant: {0}")]
    NotSdd(String),
    #[error("k-oracle stalled after {iterations} iterations (q = {q_value}, lower bound = {lower_bound})")]
    Stalled {
        iterations: usize,
        q_value: f64,
        lower_bound: f64,
    },
    #[error("dimension {dim} too large for brute-force verification (max {max})")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("invalid delta {0}: must lie in (0, 1]")]
    InvalidDelta(f64),
    #[error("sparsification failed after {rounds} rounds")]
    SparsificationFailed { rounds: usize },
    #[error("iterate norm {norm} exceeds diameter bound {bound}")]
    DiameterExceeded { norm: f64, bound: f64 },
    #[error("no convergence within {0} iterations")]
    MaxIters(usize),
    #[error("{side} {index} has no stored entries")]
    ZeroMarginal { side: &'static str, index: usize },
    #[error("invalid eps {0}: must lie in (0, 1]")]
    InvalidEps(f64),
    #[error("matrix 1-norm {0} exceeds 1")]
    NotNormalized(f64),
    #[error("no eps-scaling found up to diameter bound {0}")]
    BMaxExceeded(f64),
    #[error("invalid n = {0}: must be even and at least 4")]
    InvalidN(usize),
    #[error("invalid b = {0}: must be at least 2")]
    InvalidB(f64),
    #[error("invalid block size {block} for n = {n}")]
    InvalidBlock { n: usize, block: usize },
    #[error("invalid tau {tau} for n = {n}")]
    InvalidTau { n: usize, tau: f64 },
    #[error("dense check needs dimension at most {max}, got {dim}")]
    TooLarge { dim: usize, max: usize },
    #[error("reference point is not an exact scaling (error {0})")]
    NotScaled(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("matrix market parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
