use thiserror::Error;

/// Errors raised by model construction, the solvers and the harnesses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("basis {index} is rank deficient")]
    RankDeficientBasis { index: usize },

    #[error("subspaces do not span the ambient space (rank {rank} < {p})")]
    SpanViolation { rank: usize, p: usize },

    #[error("invalid group structure: {0}")]
    InvalidGroups(String),

    #[error("empty restriction: at least one active subspace is required")]
    EmptyRestriction,

    #[error("near-singular concatenation: smallest singular value {sigma_min:e} (subspaces nearly aligned)")]
    NearSingular { sigma_min: f64 },

    #[error("operation requires disjoint groups")]
    UnsupportedStructure,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("solver diverged (non-finite objective at iteration {iteration})")]
    Divergence { iteration: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
