use thiserror::Error;

/// Errors produced by the estimation library and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("khatri-rao operands have {left} and {right} columns")]
    ColumnMismatch { left: usize, right: usize },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid unfolding mode {0} (expected 1, 2 or 3)")]
    InvalidMode(usize),

    #[error("matrix has zero Frobenius norm")]
    ZeroMatrix,

    #[error("power iteration did not converge")]
    NoConvergence,

    #[error("infeasible design: {0}")]
    InfeasibleDesign(String),

    #[error("design matrix does not have full column rank")]
    RankDeficientDesign,

    #[error("least-squares target lost column rank at iteration {iteration}")]
    RankDeficientUpdate { iteration: usize },

    #[error("designs are not column-orthogonal (deviation {deviation:.3e})")]
    NonOrthogonalDesign { deviation: f64 },

    #[error("reference has zero norm")]
    ZeroTruth,

    #[error("fisher information matrix is singular")]
    SingularFim,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }
}
