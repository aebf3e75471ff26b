use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid observation grid: {0}")]
    InvalidGrid(String),

    #[error("target domain is empty: [{u_min}, {u_max}]")]
    EmptyDomain { u_min: f64, u_max: f64 },

    #[error("a path set needs at least one path")]
    EmptyPathSet,

    #[error("channel has zero energy")]
    ZeroChannel,

    #[error("noise variance is zero")]
    ZeroNoise,

    #[error("meta-atom window vanishes on every grid point")]
    ZeroVector,

    #[error("residual contains non-finite entries")]
    NonFiniteResidual,

    #[error("least-squares system is rank deficient")]
    RankDeficient,

    #[error("dictionary has no atoms")]
    EmptyDictionary,

    #[error("invalid search configuration: {0}")]
    InvalidSearch(String),

    #[error("argument arity mismatch: {0}")]
    ArityMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("reference channel {index} has zero energy")]
    ZeroTruth { index: usize },

    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "budget exceeded: {method} would need {predicted} selection multiplications per \
         iteration ({approx:.3e}), ceiling is {budget}",
        approx = *.predicted as f64
    )]
    BudgetExceeded {
        method: String,
        predicted: u128,
        budget: u128,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
