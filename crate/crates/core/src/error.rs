use thiserror::Error;

use crate::solver::SolveStatus;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum RmpError {
    #[error("duplicate subsystem label `{0}`")]
    LabelCollision(String),

    #[error("unknown subsystem label `{0}`")]
    UnknownLabel(String),

    #[error("invalid layout: {0}")]
    InvalidLayout(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("not a valid channel: {0}")]
    InvalidChannel(String),

    #[error("eigendecomposition did not converge")]
    EigenConvergence,

    #[error("solver returned {status:?}: {detail}")]
    Solver { status: SolveStatus, detail: String },

    #[error("no witness exists: {0}")]
    NoWitness(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("sample {index}: {source}")]
    Sample {
        index: u64,
        #[source]
        source: Box<RmpError>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, RmpError>;
