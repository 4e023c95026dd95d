use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient: pivot {pivot} has norm {norm:e} (leading norm {leading:e})")]
    RankDeficient { pivot: usize, norm: f64, leading: f64 },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    /// `2LM ≤ δ`: the sequence length sits below the predicted transition and
    /// the noise-calibrated constraint radius is undefined.
    #[error("no feasible constraint radius: 2LM = {capacity} does not exceed delta = {delta}")]
    InfeasibleRadius { capacity: f64, delta: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
