use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length {0} is not a power of 4")]
    InvalidLength(usize),
    #[error("invalid Pauli label: {0}")]
    InvalidLabel(String),
    #[error("matrix is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("map is not trace preserving (deviation {0:.3e})")]
    NotTracePreserving(f64),
    #[error("invalid channel: {0}")]
    InvalidChannel(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("gate {0} is not supported here")]
    UnsupportedGate(String),
    #[error("noise model has no channel for {0}")]
    MissingChannel(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("confusion matrix is ill-conditioned (condition number {0:.3e})")]
    Conditioning(f64),
    #[error("design matrix is rank deficient: rank {rank} < {required}")]
    RankDeficient { rank: usize, required: usize },
    #[error("design budget exhausted at rank {achieved}/{required}; missing directions: {missing:?}")]
    BudgetExceeded {
        achieved: usize,
        required: usize,
        missing: Vec<String>,
    },
    #[error("decay fit is degenerate: {0}")]
    FitDegenerate(String),
    #[error("non-finite value: {0}")]
    NonFinite(String),
}
