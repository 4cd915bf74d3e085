use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("period {t} outside 1..={horizon}")]
    PeriodOutOfRange { t: usize, horizon: usize },
    #[error("horizon {horizon} exceeds the enumerable bound {max} for the backward-induction oracle")]
    Capability { horizon: usize, max: usize },
    #[error("policy returned non-finite consumption {value} in period {t}")]
    Simulation { t: usize, value: f64 },
    #[error("shock sequence has length {got}, expected {expected}")]
    ShockLength { got: usize, expected: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SessionError {
    #[error("participant {0} already has a session in this study")]
    Conflict(String),
    #[error("submission for round {got_round} period {got_period} but session is at round {round} period {period}")]
    Sequence {
        got_round: usize,
        got_period: usize,
        round: usize,
        period: usize,
    },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("missing required fields: {}", .0.join(", "))]
    MissingFields(Vec<String>),
    #[error("session is in phase {phase}, cannot {action}")]
    State { phase: String, action: String },
    #[error("invalid study configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("incomplete path: {0}")]
    IncompletePath(String),
    #[error("effect size undefined: pooled standard deviation is zero")]
    UndefinedEffect,
    #[error("design matrix is rank deficient; collinear columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("zero spread in sample; pass an explicit bandwidth")]
    ZeroSpread,
    #[error("unknown column {0}")]
    UnknownColumn(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum StorageError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at {path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("no completed sessions to export")]
    EmptyExport,
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

impl StorageError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        StorageError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
