use thiserror::Error;

/// Every failure the library reports. Check failures are not errors; they
/// travel inside reports as `pass = false`.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpdeError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("time grids do not match")]
    GridMismatch,
    #[error("ensemble is empty")]
    EmptyEnsemble,
    #[error("resolvent sample {0} lies inside the sector")]
    InsideSector(String),
    #[error("noise mode incompatible with integrand: {0}")]
    ModeMismatch(String),
    #[error("Picard iteration is not contracting (measured ratio {ratio:.4} over 3 iterations)")]
    NonContraction { ratio: f64 },
    #[error("truncation gluing violated between levels {lower} and {upper} at node {node}")]
    GluingViolation { lower: f64, upper: f64, node: usize },
    #[error("coupled pair differs although the initial values coincide (coupling bug)")]
    CouplingBug,
    #[error("iterate {iteration} left the admissible set: {term} = {value:.6e} exceeds {bound:.6e}")]
    LeftAdmissibleSet {
        iteration: usize,
        term: String,
        value: f64,
        bound: f64,
    },
    #[error("data outside the declared ball: {0}")]
    OutsideBall(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, SpdeError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(SpdeError::InvalidParameter(msg.into()))
}

impl From<std::io::Error> for SpdeError {
    fn from(e: std::io::Error) -> Self {
        SpdeError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for SpdeError {
    fn from(e: serde_json::Error) -> Self {
        SpdeError::Config(e.to_string())
    }
}

impl From<csv::Error> for SpdeError {
    fn from(e: csv::Error) -> Self {
        SpdeError::Io(e.to_string())
    }
}
