use std::path::PathBuf;

use thiserror::Error;

use crate::backends::BackendError;
use crate::evaluation::EvalError;
use crate::model::TaskKind;
use crate::prompting::TemplateError;
use crate::sampling::SamplingError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the command line to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    BackendFatal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{task} is not supported by text-only backend `{backend}`")]
    UnsupportedTask { task: TaskKind, backend: String },

    #[error("no relation constraint for entity type pair ({head}, {tail})")]
    MissingConstraint { head: String, tail: String },

    #[error(transparent)]
    Template(#[from] TemplateError),

    #[error(transparent)]
    Backend(#[from] BackendError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Sampling(#[from] SamplingError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Config(_)
            | Error::UnsupportedTask { .. }
            | Error::MissingConstraint { .. }
            | Error::Template(_) => ErrorKind::Config,
            Error::Backend(e) if e.is_fatal() => ErrorKind::BackendFatal,
            Error::Backend(_)
            | Error::Data(_)
            | Error::Eval(_)
            | Error::Sampling(_)
            | Error::Io { .. }
            | Error::Json { .. } => ErrorKind::Data,
        }
    }
}
