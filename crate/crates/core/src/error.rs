use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("column lengths differ: {0}")]
    LengthMismatch(String),

    #[error("instrument dimension {dim} has value {value} outside its declared support")]
    UnknownInstrumentValue { dim: usize, value: i64 },

    #[error("instrument cell {cell:?} has no observations")]
    EmptyInstrumentCell { cell: Vec<i64> },

    #[error("treatment takes fewer than two distinct values ({0})")]
    DegenerateTreatment(String),

    #[error("declared treatment arm {0} is never observed")]
    UnobservedTreatmentArm(f64),

    #[error("non-finite value in column {column} at row {row}")]
    NonFiniteValue { column: &'static str, row: usize },

    #[error("invalid instrument grid: {0}")]
    InvalidGrid(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cell {cell} has zero empirical probability")]
    DivisionByZeroCell { cell: usize },

    #[error("candidate set is empty")]
    EmptyCandidateSet,

    #[error("bootstrap resample left instrument cell {cell} empty")]
    EmptyBootstrapCell { cell: usize },

    #[error("{attempts} consecutive draws left an instrument cell empty")]
    ExcessiveRedraws { attempts: usize },

    #[error("unknown data generating process '{0}'")]
    UnknownDgp(String),

    #[error("no Monte Carlo reports to tabulate")]
    EmptyReport,

    #[error("column '{0}' not found in CSV header")]
    UnknownColumn(String),

    #[error("cannot parse '{value}' in column {column} at row {row}")]
    MalformedValue { column: String, row: usize, value: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable name used in CLI error output.
    pub fn name(&self) -> &'static str {
        match self {
            Error::LengthMismatch(_) => "LengthMismatch",
            Error::UnknownInstrumentValue { .. } => "UnknownInstrumentValue",
            Error::EmptyInstrumentCell { .. } => "EmptyInstrumentCell",
            Error::DegenerateTreatment(_) => "DegenerateTreatment",
            Error::UnobservedTreatmentArm(_) => "UnobservedTreatmentArm",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::InvalidGrid(_) => "InvalidGrid",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::DivisionByZeroCell { .. } => "DivisionByZeroCell",
            Error::EmptyCandidateSet => "EmptyCandidateSet",
            Error::EmptyBootstrapCell { .. } => "EmptyBootstrapCell",
            Error::ExcessiveRedraws { .. } => "ExcessiveRedraws",
            Error::UnknownDgp(_) => "UnknownDgp",
            Error::EmptyReport => "EmptyReport",
            Error::UnknownColumn(_) => "UnknownColumn",
            Error::MalformedValue { .. } => "MalformedValue",
            Error::Csv(_) => "Csv",
            Error::Io(_) => "Io",
        }
    }
}
