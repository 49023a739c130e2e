use std::fmt;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit codes used by the CLI.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const DATA: i32 = 3;
    pub const NUMERIC: i32 = 4;
}

#[derive(Error, Debug)]
pub enum Error {
    #[error("no instruction lines found in `{file_id}`")]
    NoInstructions { file_id: String },

    #[error("empty corpus: at least one opcode sequence is required")]
    EmptyCorpus,

    #[error("no label for file `{0}`")]
    MissingLabel(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("format violation at line {line}: {message}")]
    FormatViolation { line: u64, message: String },

    #[error("dataset contains a single class; both malware and benign rows are required")]
    SingleClass,

    #[error("insufficient rows: need {needed}, have {available}")]
    InsufficientRows { needed: usize, available: usize },

    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },

    #[error("variance threshold {threshold} removed every column")]
    EmptyFeatureSet { threshold: f64 },

    #[error("too few rows ({rows}) for {folds} folds")]
    TooFewRows { rows: usize, folds: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{}", ConfigMessage(.line, .message))]
    Config { line: Option<usize>, message: String },

    #[error("bad model file: {0}")]
    ModelFile(String),

    #[error("[{coordinate}] {source}")]
    Grid {
        coordinate: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

struct ConfigMessage<'a>(&'a Option<usize>, &'a String);

impl fmt::Display for ConfigMessage<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(line) => write!(f, "config error at line {line}: {}", self.1),
            None => write!(f, "config error: {}", self.1),
        }
    }
}

impl Error {
    pub fn shape(expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub fn config(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    /// Wraps the error with the experiment-grid coordinate it occurred at.
    pub fn at(self, coordinate: impl Into<String>) -> Self {
        Error::Grid {
            coordinate: coordinate.into(),
            source: Box::new(self),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::InvalidArgument(_) => exit_code::CONFIG,
            Error::NonFiniteLoss { .. } => exit_code::NUMERIC,
            Error::Grid { source, .. } => source.exit_code(),
            _ => exit_code::DATA,
        }
    }
}
