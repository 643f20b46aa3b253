//! Error type shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while ingesting, scoring, fitting, or
/// rendering.
///
/// Variants carry enough context to report the failure to a user without a
/// backtrace: offending line numbers, field names, and values.
#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed into the expected schema.
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },

    /// The same region id appeared more than once in one dataset.
    #[error("duplicate region id {0:?}")]
    DuplicateRegion(String),

    /// A numeric field fell outside its documented range.
    #[error("{field} value {value} is out of range")]
    RangeViolation { field: String, value: f64 },

    /// An operation needed more values than it was given.
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },

    /// A percentile fell outside `[0, 1]`.
    #[error("percentile {0} is outside [0, 1]")]
    OutOfRange(f64),

    /// Weights were negative, did not sum to one, or had the wrong arity.
    #[error("invalid weights: {0}")]
    InvalidWeights(String),

    /// Two parallel sequences had different lengths.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A grid step does not divide the unit interval exactly.
    #[error("grid step {0} does not divide 1 into a whole number of cells")]
    InvalidStep(f64),

    /// A descent start point was outside the open weight simplex.
    #[error("invalid start point: {0}")]
    InvalidStart(String),

    /// A subgradient evaluated to NaN or infinity.
    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    /// The regression design matrix was numerically rank deficient.
    #[error("design matrix is rank deficient")]
    RankDeficient,

    /// A score table has no column with the requested name.
    #[error("no score column named {0:?}")]
    MissingColumn(String),

    /// A polygon ring was unusable (open, too short, non-finite vertex).
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    /// A remote fetch failed; no partial files are left behind.
    #[error("network error fetching {url}: {reason}")]
    Network { url: String, reason: String },

    /// A remote file no longer carries the columns this crate relies on.
    #[error("source schema changed for {file}: missing expected columns {missing:?}")]
    SourceSchemaChanged { file: String, missing: Vec<String> },

    /// Filesystem failure, tagged with the path involved.
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// JSON (de)serialization failure.
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub(crate) fn csv_row(source: &csv::Error) -> Self {
        Error::MalformedRow {
            line: source.position().map_or(0, |p| p.line()),
            reason: source.to_string(),
        }
    }
}
