use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Iterative eigensolver hit its iteration cap. `iterate` is the last
    /// normalized right singular vector estimate.
    #[error("spectral norm did not converge in {iterations} iterations (last estimate {estimate})")]
    NoConvergence {
        iterations: usize,
        estimate: f64,
        iterate: Vec<f64>,
    },

    #[error("inadmissible alpha: {0}")]
    InadmissibleAlpha(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the CLI: 1 config/input, 3 non-convergence.
    /// Oracle failures (2) are not errors; they are reported by the suite.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoConvergence { .. } => 3,
            _ => 1,
        }
    }
}
