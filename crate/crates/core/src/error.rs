use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a mathematical precondition (non-SPD matrix,
    /// nonpositive density, mismatched grids, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Moments that no valid parameter set can produce.
    #[error("infeasible moments: {0}")]
    Infeasible(String),

    /// An iterative solve exhausted its budget; carries the last residual.
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    /// Configuration rejected before any compute.
    #[error("config error: {0}")]
    Config(String),

    /// A fit whose signal is below the noise floor.
    #[error("inconclusive fit: {0}")]
    Inconclusive(String),

    /// Solver aborted mid-run (NaN/Inf field); diagnostics up to the last
    /// good step are preserved by the caller.
    #[error("solver aborted at t = {t}: {reason}")]
    Aborted { t: f64, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn infeasible(msg: impl Into<String>) -> Self {
        Error::Infeasible(msg.into())
    }
}
