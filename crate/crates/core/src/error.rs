use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A loss or metric evaluated to NaN or infinity.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("{0} is not differentiable")]
    NotDifferentiable(&'static str),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("row {row}: column `{column}` has non-numeric value `{value}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("empty split: {0}")]
    EmptySplit(&'static str),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("missing inputs: {}", list_paths(.0))]
    MissingInputs(Vec<PathBuf>),
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", ")
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Short machine-readable tag for the error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidConfig(_) => "invalid_config",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::NotDifferentiable(_) => "not_differentiable",
            Error::MissingColumn(_) => "missing_column",
            Error::NonNumeric { .. } => "non_numeric",
            Error::EmptySplit(_) => "empty_split",
            Error::Format { .. } => "format",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::MissingInputs(_) => "missing_input",
        }
    }
}
