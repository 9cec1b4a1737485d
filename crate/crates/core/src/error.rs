use alloc::boxed::Box;
use alloc::string::String;
use core::fmt;

/// Crate-wide result type.
pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by environments, solvers, and the training stack.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A parameter or configuration value violates its documented range.
    /// The message names the violated condition.
    InvalidConfig(String),
    /// A vector had the wrong length for the space or network it was fed to.
    DimensionMismatch { expected: usize, got: usize },
    /// A policy or caller produced a NaN/inf action component.
    NonFiniteAction { step: usize },
    /// `step` was called after the episode already ended.
    EpisodeOver { horizon: usize },
    /// A replay buffer was asked for more samples than it holds.
    BufferUnderfilled { len: usize, requested: usize },
    /// A training loss became NaN/inf; the message carries batch diagnostics.
    NonFiniteLoss(String),
    /// An iterative solver hit its iteration cap before reaching tolerance.
    NoConvergence { iterations: usize, residual: f64 },
    /// The requested dynamics have no bistable regime, so fold points do not
    /// exist. The message names the violated condition.
    NoBistableRegime(String),
    /// A parameter snapshot failed to parse; `line` is 1-based.
    SnapshotFormat { line: usize, detail: String },
    /// An error that occurred while rolling out a specific replicate.
    Replicate { index: usize, source: Box<Error> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::NonFiniteAction { step } => {
                write!(f, "non-finite action at step {step}")
            }
            Error::EpisodeOver { horizon } => {
                write!(f, "episode already ended (horizon {horizon}); reset before stepping")
            }
            Error::BufferUnderfilled { len, requested } => {
                write!(f, "replay buffer holds {len} transitions, {requested} requested")
            }
            Error::NonFiniteLoss(detail) => write!(f, "non-finite training loss: {detail}"),
            Error::NoConvergence { iterations, residual } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            Error::NoBistableRegime(msg) => write!(f, "no bistable regime: {msg}"),
            Error::SnapshotFormat { line, detail } => {
                write!(f, "snapshot parse error at line {line}: {detail}")
            }
            Error::Replicate { index, source } => {
                write!(f, "replicate {index}: {source}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
