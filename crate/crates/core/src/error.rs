use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad parameters or configuration.
    Config,
    /// Malformed or insufficient input data.
    Data,
    /// The numbers came out degenerate (zero variance, singular fit, ...).
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("series needs at least 2 distinct timestamps, got {0}")]
    EmptySeries(usize),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("timestamps must be strictly increasing (index {index})")]
    NotIncreasing { index: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("series is not centered: |mean| = {mean:e} exceeds 1e-9 * stdev = {limit:e}")]
    NotCentered { mean: f64, limit: f64 },

    #[error("inputs are on different grids")]
    GridMismatch,

    #[error("partials belong to different series: `{0}` vs `{1}`")]
    LabelMismatch(String, String),

    #[error("smoothing half-width {half_width} too wide for {count} frequencies")]
    WindowTooWide { half_width: usize, count: usize },

    #[error("degenerate variance: zero-lag autocovariance is {0:e}")]
    DegenerateVariance(f64),

    #[error("regression window holds {0} frequencies, at least 8 are needed")]
    TooFewFrequencies(usize),

    #[error("differentiation order {0} outside [0, 2]")]
    AlphaOutOfRange(f64),

    #[error("truncation {truncation} exceeds series length {len}")]
    TruncationTooLong { truncation: usize, len: usize },

    #[error("resampling grid starts at {grid_start} before the first observation at {first}")]
    GridBeforeData { grid_start: f64, first: f64 },

    #[error("observation spans do not overlap")]
    NoOverlap,

    #[error("need at least {needed} trials, got {got}")]
    TooFewTrials { needed: usize, got: usize },

    #[error("circulant embedding has negative eigenvalue {0:e}")]
    EmbeddingFailure(f64),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("malformed signature record: {0}")]
    Decode(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub fn class(&self) -> ErrorClass {
        use Error::*;
        match self {
            InvalidParameter { .. }
            | WindowTooWide { .. }
            | AlphaOutOfRange(_)
            | TruncationTooLong { .. }
            | TooFewTrials { .. } => ErrorClass::Config,
            DegenerateVariance(_) | TooFewFrequencies(_) | EmbeddingFailure(_) => {
                ErrorClass::Numerical
            }
            EmptySeries(_)
            | NonFinite { .. }
            | NotIncreasing { .. }
            | LengthMismatch { .. }
            | NotCentered { .. }
            | GridMismatch
            | LabelMismatch(..)
            | GridBeforeData { .. }
            | NoOverlap
            | Parse { .. }
            | Decode(_)
            | Io(_) => ErrorClass::Data,
        }
    }
}
