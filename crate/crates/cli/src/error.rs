use std::fmt;

use auctionlab::ingest::IngestError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, config or input files.
    #[error("{0}")]
    Input(String),
    /// Several input files failed to parse.
    #[error("{} input file(s) failed to parse", .0.len())]
    InputFiles(Vec<IngestError>),
    /// An invariant of the engine or estimators did not hold.
    #[error("{0}")]
    Internal(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn internal(msg: impl fmt::Display) -> Self {
        CliError::Internal(msg.to_string())
    }

    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) | CliError::InputFiles(_) | CliError::Io { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    /// One diagnostic line per underlying problem.
    pub fn report(&self) {
        let kind = match self.exit_code() {
            1 => "input",
            _ => "internal",
        };
        match self {
            CliError::InputFiles(errors) => {
                for e in errors {
                    crate::diag("error", "schema", &[("kind", kind), ("message", &e.to_string())]);
                }
            }
            e => crate::diag("error", "failed", &[("kind", kind), ("message", &e.to_string())]),
        }
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        match e {
            IngestError::Io(source) => CliError::Io {
                path: String::new(),
                source,
            },
            e => CliError::Input(e.to_string()),
        }
    }
}
