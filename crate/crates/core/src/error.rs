use thiserror::Error;

/// Errors raised by the engine. Configuration errors name the offending field.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid path: {0}")]
    InvalidPath(String),

    #[error("ink width {width} mm is below the {floor} mm detectability floor")]
    InkTooNarrow { width: f64, floor: f64 },

    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("empty sensor history, no estimate")]
    EmptyHistory,

    #[error("sensor history out of order at t={timestamp} ms")]
    HistoryOutOfOrder { timestamp: u64 },

    #[error("clock regression: t={now} ms is earlier than t={previous} ms")]
    ClockRegression { now: u64, previous: u64 },

    #[error("input timestamps must strictly increase: t={timestamp} ms follows t={previous} ms")]
    NonIncreasingTimestamp { timestamp: u64, previous: u64 },

    #[error("empty trace")]
    EmptyTrace,

    #[error("trace format error: {0}")]
    TraceFormat(String),

    #[error("unsupported trace version {found} (supported: {supported})")]
    UnsupportedVersion { found: u32, supported: u32 },

    #[error("config hash mismatch: header says {recorded}, contents hash to {computed}")]
    ConfigHashMismatch { recorded: String, computed: String },

    #[error("record digest mismatch: footer says {recorded}, records hash to {computed}")]
    DigestMismatch { recorded: String, computed: String },

    #[error("replay diverged at record {index} (t={timestamp} ms): {field} differs")]
    ReplayMismatch {
        index: usize,
        timestamp: u64,
        field: String,
    },

    #[error("session protocol violation: {0}")]
    Protocol(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
