use thiserror::Error;

#[derive(Debug, Error)]
pub enum GgmError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("failed to converge: {0}")]
    Convergence(String),

    #[error("degenerate LARS direction (collinear active columns) at lambda = {lambda}")]
    DegenerateDirection { lambda: f64 },

    #[error("Langevin chain for node {node} diverged at step {step} (|v| = {norm:e})")]
    Divergence { node: usize, step: usize, norm: f64 },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GgmError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        GgmError::Domain(msg.into())
    }

    /// True for failures that come from the numerics rather than from bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            GgmError::Convergence(_)
                | GgmError::DegenerateDirection { .. }
                | GgmError::Divergence { .. }
                | GgmError::Numeric(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, GgmError>;
