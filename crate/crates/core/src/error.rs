use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors raised by the library and surfaced by the command-line tool.
#[derive(Debug, Error)]
pub enum Error {
    #[error("missing execution file for gesture {gesture}, execution {execution}: {path}")]
    MissingExecution {
        gesture: usize,
        execution: usize,
        path: PathBuf,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("parse error in {location}: {message}")]
    Parse { location: String, message: String },

    #[error("length error: {0}")]
    Length(String),

    #[error("synthetic spec error: {0}")]
    Spec(String),

    #[error("zero variance: sequence is constant")]
    ZeroVariance,

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("symbol {symbol} out of range 1..={alphabet}")]
    SymbolOutOfRange { symbol: usize, alphabet: usize },

    #[error("no models to classify against")]
    EmptyModelSet,

    #[error("empty input")]
    EmptyInput,

    #[error("incomplete grid: {0}")]
    IncompleteGrid(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("failed to load model {path}: {message}")]
    ModelLoad { path: PathBuf, message: String },

    #[error("alphabet mismatch: expected {expected}, found {found}")]
    AlphabetMismatch { expected: usize, found: usize },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line tool: 2 config, 3 data, 4 compute.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json { .. } => 2,
            Error::MissingExecution { .. }
            | Error::Shape(_)
            | Error::Parse { .. }
            | Error::Length(_)
            | Error::Spec(_)
            | Error::ZeroVariance
            | Error::DegenerateInput(_)
            | Error::IncompleteGrid(_)
            | Error::ModelLoad { .. }
            | Error::AlphabetMismatch { .. }
            | Error::SymbolOutOfRange { .. }
            | Error::Io { .. }
            | Error::Csv { .. } => 3,
            Error::Param(_) | Error::EmptyTrainingSet | Error::EmptyModelSet | Error::EmptyInput => 4,
        }
    }
}
