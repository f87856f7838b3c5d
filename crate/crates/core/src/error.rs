use thiserror::Error;

/// Errors produced by schedule synthesis, tree construction and the analyzers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("schedule infeasible at level {level}: {reason}")]
    Infeasible { level: usize, reason: String },

    #[error("attempt cap of {cap} exhausted at level {level} (seed {seed})")]
    AttemptCap { level: usize, seed: u64, cap: u32 },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("level {level} out of range: {reason}")]
    LevelRange { level: usize, reason: String },

    #[error("interval endpoints are not aligned to the grid of any built level")]
    NotGridAligned,

    #[error("enumeration guard exceeded: {tuples} tuples > {limit}; use energy_via_convolution")]
    EnumerationGuard { tuples: f64, limit: f64 },

    #[error("tail not integrable by the decay certificate: q*beta/2 = {0} <= 1")]
    TailDivergent(f64),

    #[error("level {level} needs a dense transform of length {len}, above the limit {limit}")]
    TooLarge { level: usize, len: String, limit: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 configuration, 3 infeasible, 4 invariant, 5 attempt cap.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Infeasible { .. } => 3,
            Error::Invariant(_) => 4,
            Error::AttemptCap { .. } => 5,
            _ => 2,
        }
    }

    /// Short machine-readable tag.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter(_) => "invalid-parameter",
            Error::Infeasible { .. } => "infeasible",
            Error::AttemptCap { .. } => "attempt-cap",
            Error::Invariant(_) => "invariant",
            Error::LevelRange { .. } => "level-range",
            Error::NotGridAligned => "not-grid-aligned",
            Error::EnumerationGuard { .. } => "enumeration-guard",
            Error::TailDivergent(_) => "tail-divergent",
            Error::TooLarge { .. } => "too-large",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
