use std::fmt;

/// Errors produced anywhere in the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidSolverConfig(String),

    #[error("growth cap violated: dt * h = {value} >= 1 in cell {cell}")]
    GrowthCap { cell: usize, value: f64 },

    #[error("linear solve did not converge after {iterations} iterations (residual {residual:e})")]
    LinearSolve { iterations: usize, residual: f64 },

    #[error("forward solve failed at step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value produced at step {step}")]
    NonFinite { step: usize },

    #[error("no snapshot available for observation time {0}")]
    MissingSnapshot(f64),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid observation operator: {0}")]
    InvalidObservation(String),

    #[error("invalid prior: {0}")]
    InvalidPrior(String),

    #[error("invalid MCMC configuration: {0}")]
    InvalidMcmc(String),

    #[error("no finite initial state after {0} prior draws")]
    InitialState(usize),

    #[error("empty chain or ensemble")]
    Empty,

    #[error("Hellinger estimate failed: {0}")]
    Hellinger(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("configuration invalid: {}", Violations(.0))]
    Validation(Vec<String>),

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

struct Violations<'a>(&'a [String]);

impl fmt::Display for Violations<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join("; "))
    }
}

impl Error {
    /// Whether the error stems from user input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidGrid(_)
                | Error::InvalidSolverConfig(_)
                | Error::InvalidObservation(_)
                | Error::InvalidPrior(_)
                | Error::InvalidMcmc(_)
                | Error::Parse { .. }
                | Error::Validation(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
