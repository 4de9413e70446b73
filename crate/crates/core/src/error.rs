use crate::model::EpiPoint;
use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    Usage(String),

    #[error("problem `{problem}` lacks the {capability} capability")]
    Capability {
        problem: String,
        capability: &'static str,
    },

    #[error("inner solver did not converge (residual {residual:.3e})")]
    InnerSolver { best: EpiPoint, residual: f64 },

    #[error("projection engine failed: {0}")]
    Engine(String),

    #[error("cut model degenerate: candidate has |g| = {g_norm:.3e} but height gain {height:.3e}")]
    ModelDegeneracy { g_norm: f64, height: f64 },

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("algorithm invariant broken: {0}")]
    AlgorithmInvariant(String),

    #[error("oracle budget of {0} calls exhausted")]
    BudgetExhausted(usize),

    #[error("problem file: {0}")]
    ProblemFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
