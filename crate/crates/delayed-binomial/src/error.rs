//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the pricing engine.
#[derive(Debug, Error)]
pub enum EngineError {
    /// Market parameters violate one or more model invariants.
    /// Each entry is a human-readable label of a violated condition.
    #[error("invalid market parameters: {}", .0.join("; "))]
    InvalidParams(Vec<String>),

    /// A payoff specification is inconsistent with the lattice.
    #[error("invalid payoff: {0}")]
    InvalidPayoff(String),

    /// The payoff is not discretely convex in the terminal price.
    #[error("payoff is not convex in the terminal price")]
    NonConvexPayoff,

    /// An index (time, up-count, ...) is outside its admissible range.
    #[error("{what} out of range: {value} not in [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },

    /// A brute-force operation exceeds its hard size cap.
    #[error("{what} capped at {cap}, got {value}")]
    SizeCap {
        what: &'static str,
        cap: usize,
        value: usize,
    },

    /// The diffusive scaling at this step count leaves the validity window
    /// `d < e^r < u`; `min_valid_n` is the smallest step count that restores it.
    #[error("scaling invalid at n={n}: rate window d < e^r < u fails (minimal valid n: {min_valid_n})")]
    ScalingInvalid { n: usize, min_valid_n: usize },

    /// The simplex solver hit a numerically degenerate state it refuses to
    /// absorb silently.
    #[error("linear program numerically degenerate: {0}")]
    LpDegenerate(String),

    /// A malformed strategy table (wrong level count or history size).
    #[error("malformed strategy table: {0}")]
    MalformedStrategy(String),

    /// Configuration file / CLI input problems.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl EngineError {
    /// Process exit code mandated for this error class by the CLI contract:
    /// 2 for configuration problems, 3 for size caps and validity windows,
    /// 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            EngineError::InvalidConfig(_)
            | EngineError::InvalidParams(_)
            | EngineError::InvalidPayoff(_)
            | EngineError::NonConvexPayoff
            | EngineError::Json(_) => 2,
            EngineError::SizeCap { .. } | EngineError::ScalingInvalid { .. } => 3,
            _ => 1,
        }
    }
}
