use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A schedule, profile, parameter set or plan violates its invariants.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("sample budget exceeded: run needs {requested} samples, budget is {budget}")]
    SampleBudgetExceeded { requested: u64, budget: u64 },
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("input too short: need at least {needed} rows, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("invalid fraction {0}: must lie in (0, 1]")]
    InvalidFraction(f64),
    #[error("column mismatch: expected {expected} columns, got {got}")]
    ColumnMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("actual values have zero variance")]
    ZeroVariance,
    #[error("non-finite value in column {column} at row {row}")]
    NonFinite { column: String, row: usize },
    #[error("plateau {0} is not present in the table")]
    MissingPlateau(u32),
    #[error("empty partition: {0}")]
    EmptyPartition(&'static str),
    #[error("malformed data: {0}")]
    Malformed(String),
}

impl Error {
    /// True for errors caused by configuration rather than by the data.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::SampleBudgetExceeded { .. } | Error::InvalidFraction(_)
        )
    }
}
