use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A state exceeded the overflow guard or became non-finite.
    #[error("simulation diverged at time step {step} (|state| > {limit:e} or non-finite)")]
    Unstable { step: usize, limit: f64 },

    #[error("no acyclic latent subgraph after {tries} tries")]
    GenerationFailed { tries: usize },

    #[error("insufficient rows: need at least {needed}, have {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("degenerate regressors: {0}")]
    Degenerate(String),

    #[error("conditioning set has dimension {dim}, above the limit of {max}")]
    Dimensionality { dim: usize, max: usize },

    #[error("every instance failed for p = {p}, lag = {lag}")]
    AllInstancesFailed { p: f64, lag: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }
}
