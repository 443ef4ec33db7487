use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClemoError {
    #[error("dimension mismatch: {what} expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("solver precondition violated: {0}")]
    Precondition(String),

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("instance too large for exhaustive oracle: {0}")]
    OracleRefused(String),

    #[error("sampler starvation: accepted {accepted} of {draws} draws")]
    SamplerStarvation { accepted: usize, draws: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("non-finite loss at initial point")]
    NonFiniteLoss,

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl ClemoError {
    /// True for errors caused by an infeasible or out-of-domain problem instance.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, ClemoError::Infeasible(_) | ClemoError::Precondition(_))
    }
}

pub type Result<T> = std::result::Result<T, ClemoError>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(ClemoError::DimensionMismatch {
            what,
            expected,
            got,
        });
    }
    Ok(())
}
