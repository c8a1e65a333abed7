use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Weighted statistics requested over zero total weight.
    #[error("degenerate statistics: total weight is zero")]
    DegenerateStatistics,

    /// The equilibrium dispersion formula has no finite value.
    #[error("no finite equilibrium dispersion: alpha + beta = {0} must lie strictly inside (0, 2)")]
    NoFiniteEquilibrium(f64),

    /// Invalid configuration, with a path to the offending key where known.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// A production event referenced a word whose store is empty.
    #[error("word {0} has no live exemplars to sample from")]
    EmptyWord(usize),

    /// Time step violates the positivity condition of the explicit scheme.
    #[error("unstable time step: dt * lambda = {0} exceeds 1")]
    Stability(f64),

    /// A diagnostics series is too short for the requested analysis.
    #[error("insufficient data: series spans {got} time units, need at least {need}")]
    InsufficientData { got: f64, need: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("failed to parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
