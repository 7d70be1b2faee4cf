use thiserror::Error;

pub type Result<T> = std::result::Result<T, BellError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BellError {
    #[error("scenario mismatch: expected (N={expected_n}, K={expected_k}), got (N={got_n}, K={got_k})")]
    ScenarioMismatch {
        expected_n: usize,
        expected_k: usize,
        got_n: usize,
        got_k: usize,
    },
    #[error("invalid game: {0}")]
    InvalidGame(String),
    #[error("invalid functional: {0}")]
    InvalidFunctional(String),
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid POVM: {0}")]
    InvalidPovm(String),
    #[error("invalid strategy: {0}")]
    InvalidStrategy(String),
    #[error("index out of range: {0}")]
    OutOfRange(String),
    #[error("numeric consistency check failed: {0}")]
    NumericConsistency(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("certification failed: feasibility residual {residual:e}")]
    CertificationFailed { residual: f64 },
    #[error("linear program: {0}")]
    Lp(String),
}
