use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by loading, estimation, inference and simulation.
///
/// Every variant has a stable name (see [`Error::name`]) that the CLI prints
/// and the FFI layer maps onto an integer code.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o failure on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: column `{column}` holds non-numeric value `{value}`")]
    NonNumericOutcome {
        row: usize,
        column: String,
        value: String,
    },
    #[error("row {row}: column `{column}` is empty")]
    MissingValue { row: usize, column: String },
    #[error("row {row}: duplicate observation for unit `{unit}` in period {period}")]
    DuplicateUnitPeriod {
        row: usize,
        unit: String,
        period: i64,
    },
    #[error("dataset has no rows")]
    EmptyDataset,
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
    #[error("no observations in period {period} for group {group}")]
    EmptyCell { period: i64, group: String },
    #[error("invalid information set: {0}")]
    InvalidInformationSet(String),
    #[error("bias variation set needs at least two consecutive pre-periods")]
    NeedsAtLeastTwoPeriods,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("logistic regression: outcome has a single class")]
    SingleClass,
    #[error("logistic regression: perfect or quasi-perfect separation detected")]
    SeparationDetected,
    #[error("design is degenerate: {0}")]
    DegenerateDesign(String),
    #[error("design is collinear: {0}")]
    CollinearDesign(String),
    #[error("no treated units")]
    NoTreatedUnits,
    #[error("all {0} propensity scores were clipped; overlap fails")]
    AllPropensitiesClipped(usize),
    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailedReplicates { failed: usize, total: usize },
    #[error("element {0} has fewer than two successful replicates")]
    InsufficientReplicates(String),
    #[error("panel is unbalanced: {0}")]
    UnbalancedPanel(String),
    #[error("unit `{unit}` switches out of treatment at period {period} in a staggered design")]
    TreatmentReversalInStaggeredMode { unit: String, period: i64 },
    #[error("weights must be nonnegative and sum to one (sum = {0})")]
    WeightSumInvalid(f64),
    #[error("donor pool is empty")]
    EmptyDonorPool,
    #[error("period {0} missing from a donor or treated series")]
    MissingPeriod(i64),
    #[error("sensitivity parameter must be nonnegative, got {0}")]
    NegativeM(f64),
    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Stable variant name, used in CLI diagnostics and FFI error strings.
    pub fn name(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Parse(_) => "Parse",
            Error::MissingColumn(_) => "MissingColumn",
            Error::NonNumericOutcome { .. } => "NonNumericOutcome",
            Error::MissingValue { .. } => "MissingValue",
            Error::DuplicateUnitPeriod { .. } => "DuplicateUnitPeriod",
            Error::EmptyDataset => "EmptyDataset",
            Error::InvalidPanel(_) => "InvalidPanel",
            Error::EmptyCell { .. } => "EmptyCell",
            Error::InvalidInformationSet(_) => "InvalidInformationSet",
            Error::NeedsAtLeastTwoPeriods => "NeedsAtLeastTwoPeriods",
            Error::DimensionMismatch(_) => "DimensionMismatch",
            Error::SingleClass => "SingleClass",
            Error::SeparationDetected => "SeparationDetected",
            Error::DegenerateDesign(_) => "DegenerateDesign",
            Error::CollinearDesign(_) => "CollinearDesign",
            Error::NoTreatedUnits => "NoTreatedUnits",
            Error::AllPropensitiesClipped(_) => "AllPropensitiesClipped",
            Error::TooManyFailedReplicates { .. } => "TooManyFailedReplicates",
            Error::InsufficientReplicates(_) => "InsufficientReplicates",
            Error::UnbalancedPanel(_) => "UnbalancedPanel",
            Error::TreatmentReversalInStaggeredMode { .. } => "TreatmentReversalInStaggeredMode",
            Error::WeightSumInvalid(_) => "WeightSumInvalid",
            Error::EmptyDonorPool => "EmptyDonorPool",
            Error::MissingPeriod(_) => "MissingPeriod",
            Error::NegativeM(_) => "NegativeM",
            Error::InvalidSpec(_) => "InvalidSpec",
            Error::InvalidArgument(_) => "InvalidArgument",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
