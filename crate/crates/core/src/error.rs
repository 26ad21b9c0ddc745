use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong inside the library.
///
/// Variants fall into two families: bad inputs ([`Error::is_parameter_error`])
/// and recovery failures, where the inputs were well-formed but the
/// statistics or the numerics did not support an exact answer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("index {index} out of range (bound {bound})")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("tensor entry ({a},{b},{c}) = {value} lies outside 0..={k}; the sample is too small for reliable inversion")]
    InconsistentEntry {
        a: usize,
        b: usize,
        c: usize,
        value: i64,
        k: usize,
    },

    #[error("numerical rank {rank} is below the required {required}")]
    RankDeficient { rank: usize, required: usize },

    #[error("eigenvalue gap stayed below tolerance after {retries} retries")]
    Degenerate { retries: usize },

    #[error("entry {index} is {margin:.3e} away from both 0 and 1")]
    Rounding { index: usize, margin: f64 },

    #[error("row {row} could not be recovered: {reason}")]
    Extension { row: usize, reason: String },

    #[error("recovered row {row} has {ones} ones, expected {k}")]
    Sparsity { row: usize, ones: usize, k: usize },

    #[error("search space of {required} assignments exceeds the budget of {budget}")]
    BudgetExceeded { required: f64, budget: f64 },

    #[error("letter {letter} is not in the alphabet of size {size}")]
    InvalidLetter { letter: u64, size: u64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by malformed or out-of-contract inputs, as
    /// opposed to a recovery that ran and failed.
    pub fn is_parameter_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::DimensionMismatch { .. }
                | Error::IndexOutOfRange { .. }
                | Error::InvalidLetter { .. }
                | Error::BudgetExceeded { .. }
                | Error::Format(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::Csv(_)
        )
    }
}

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
