use thiserror::Error;

/// Errors raised by the solvers, encoders and file readers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("permutation size {got} ≠ n = {expected}")]
    PermutationSize { expected: usize, got: usize },

    #[error("not a permutation: {0}")]
    NotAPermutation(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("marginal must be strictly positive (entry {index} = {value})")]
    NonPositiveMarginal { index: usize, value: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("KL loss requires positive structure (entry {value} at ({row}, {col}))")]
    KlNonPositive { row: usize, col: usize, value: f64 },

    #[error("barycenter weight must be positive (entry {index} = {value})")]
    NonPositiveBarycenterWeight { index: usize, value: f64 },

    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("oracle supports 2-node uniform only")]
    OracleDomain,

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::KlNonPositive { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
