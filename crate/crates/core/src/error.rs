//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Gram matrix of the stacked rows is (numerically) singular.
    #[error("rank-deficient Gram matrix (pivot ratio {pivot_ratio:e})")]
    RankDeficient { pivot_ratio: f64 },

    /// A new row lies (numerically) in the span of the previous rows.
    #[error("degenerate row: |h P h^H| / |h|^2 = {ratio:e}")]
    DegenerateRow { ratio: f64 },

    /// Every remaining candidate of a greedy stage was degenerate.
    #[error("no non-degenerate candidate left at selection stage {stage}")]
    NoCandidate { stage: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("exhaustive search over {subsets} subsets exceeds the cap of {cap}")]
    SearchCapExceeded { subsets: u128, cap: u128 },

    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    InvalidConfig(Vec<String>),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
