use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },

    #[error("line {line}: expected {expected} fields, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("line {line}, field {field}: non-finite value {value:?}")]
    NonFiniteValue {
        line: usize,
        field: usize,
        value: String,
    },

    #[error("duplicate marker position {position}")]
    DuplicateLocation { position: u64 },

    #[error("line {line}: non-binary phenotype value {value:?}")]
    NonBinaryValue { line: usize, value: String },

    #[error("phenotype has {found} values but the track has {expected} subjects")]
    LengthMismatch { expected: usize, found: usize },

    #[error("binary phenotype needs at least two subjects in each group")]
    DegenerateGroups,

    #[error("empty input: {0}")]
    Empty(String),

    #[error("marker {marker}: predictor has zero variance")]
    ZeroVariancePredictor { marker: usize },

    #[error("marker {marker}: intensities have zero variance")]
    ZeroVariance { marker: usize },

    #[error("too few subjects for the test: need {needed}, have {found}")]
    TooFewSubjects { needed: usize, found: usize },

    #[error("signed transform requested but the marker test is unsigned")]
    MissingSign,

    #[error("bandwidth of {k} markers exceeds the {markers} markers available")]
    KTooLarge { k: usize, markers: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("no marker has positive kernel weight at position {position}")]
    EmptySupport { position: u64 },

    #[error("every marker is masked by the bandwidth boundary rule")]
    AllMasked,

    #[error("number of null draws must be at least 1")]
    InvalidB,

    #[error("alpha must lie strictly between 0 and 1, got {0}")]
    InvalidAlpha(f64),

    #[error("exhaustive permutation needs n <= {max}, have {n}")]
    TooManyForExhaustive { n: usize, max: usize },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad options rather than bad data.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::KTooLarge { .. }
                | Error::InvalidKernel(_)
                | Error::InvalidB
                | Error::InvalidAlpha(_)
                | Error::MissingSign
                | Error::TooManyForExhaustive { .. }
                | Error::InvalidScenario(_)
                | Error::Config { .. }
        )
    }
}
