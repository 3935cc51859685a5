use std::path::PathBuf;

use thiserror::Error;

use crate::schema::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is outside its admissible domain.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// Input data (series, files, id sets) is malformed or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    /// A caller violated an operation precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("JSON syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("schema violation in record {record}: {}", format_violations(.violations))]
    Schema {
        record: usize,
        violations: Vec<Violation>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
