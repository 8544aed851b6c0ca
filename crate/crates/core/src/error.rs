use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("duplicate ticker {0:?}")]
    DuplicateTicker(String),
    #[error("no usable rows in {0}")]
    NoUsableRows(PathBuf),
    #[error("no CSV files in directory {0}")]
    EmptyDirectory(PathBuf),
    #[error("no dates are common to every ticker")]
    NoCommonDates,
    #[error("{file}: missing column {column:?}")]
    MissingColumn { file: PathBuf, column: String },
    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },
    #[error("need at least {needed} assets, got {got}")]
    TooFewAssets { needed: usize, got: usize },
    #[error("window {0:?} selects no rows")]
    EmptyWindow(String),
    #[error("invalid window: {0}")]
    BadWindow(String),
    #[error("correlation recipe is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("asset {0:?} has zero variance")]
    ZeroVariance(String),
    #[error("invalid thresholds tau_plus={tau_plus}, tau_minus={tau_minus}")]
    BadThreshold { tau_plus: f64, tau_minus: f64 },
    #[error("operation requires a {expected} matrix")]
    WrongEstimateKind { expected: &'static str },
    #[error("correlation entry ({i},{j}) = {value} lies outside [-1, 1]")]
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },
    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k = {k} outside 1..={n}")]
    KOutOfRange { k: usize, n: usize },
    #[error("empty universe")]
    EmptyUniverse,
    #[error("covariance matrix is singular or ill-conditioned (condition number {condition:e})")]
    SingularCovariance { condition: f64 },
    #[error("mean vector is parallel to the budget vector; target {epsilon} differs from the forced value {forced}")]
    DegenerateTarget { epsilon: f64, forced: f64 },
    #[error("target return {epsilon} outside the attainable range [{min}, {max}]")]
    InfeasibleTarget { epsilon: f64, min: f64, max: f64 },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error("active-set solver exceeded {0} iterations")]
    IterationCap(usize),
    #[error("ticker {0:?} missing from test panel")]
    MissingTicker(String),
}

impl Error {
    /// Stable identifier used in reports (`ERR:<code>`).
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::Csv { .. } => "Csv",
            Error::Malformed { .. } => "Malformed",
            Error::DuplicateTicker(_) => "DuplicateTicker",
            Error::NoUsableRows(_) => "NoUsableRows",
            Error::EmptyDirectory(_) => "EmptyDirectory",
            Error::NoCommonDates => "NoCommonDates",
            Error::MissingColumn { .. } => "MissingColumn",
            Error::TooFewRows { .. } => "TooFewRows",
            Error::TooFewAssets { .. } => "TooFewAssets",
            Error::EmptyWindow(_) => "EmptyWindow",
            Error::BadWindow(_) => "BadWindow",
            Error::NotPsd { .. } => "NotPSD",
            Error::ZeroVariance(_) => "ZeroVariance",
            Error::BadThreshold { .. } => "BadThreshold",
            Error::WrongEstimateKind { .. } => "WrongEstimateKind",
            Error::CorrelationOutOfRange { .. } => "CorrelationOutOfRange",
            Error::VertexOutOfRange { .. } => "VertexOutOfRange",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::KOutOfRange { .. } => "KOutOfRange",
            Error::EmptyUniverse => "EmptyUniverse",
            Error::SingularCovariance { .. } => "SingularCovariance",
            Error::DegenerateTarget { .. } => "DegenerateTarget",
            Error::InfeasibleTarget { .. } => "InfeasibleTarget",
            Error::BadParameter(_) => "BadParameter",
            Error::IterationCap(_) => "IterationCap",
            Error::MissingTicker(_) => "MissingTicker",
        }
    }

    /// Failures of a numerical routine on otherwise valid input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NotPsd { .. }
                | Error::SingularCovariance { .. }
                | Error::DegenerateTarget { .. }
                | Error::IterationCap(_)
                | Error::CorrelationOutOfRange { .. }
        )
    }
}
