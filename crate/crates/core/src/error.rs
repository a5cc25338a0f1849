use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("kernel singularity: phi({s}, {t}) is undefined on the diagonal")]
    Singularity { s: f64, t: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    /// Raised when the covariance is not numerically positive definite.
    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("divergence at iteration {iteration}, step {step}: {detail}")]
    Divergence {
        iteration: usize,
        step: usize,
        detail: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
