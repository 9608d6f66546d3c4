use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A required column is absent from the input header.
    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// Input is well-formed but violates a domain rule (unknown label, bad propensities, ...).
    #[error("domain error{}: {message}", row.map(|r| format!(" at row {r}")).unwrap_or_default())]
    Domain { row: Option<usize>, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain {
            row: None,
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    ///
    /// `2` config, `3` data, `4` infeasible or capacity, `1` anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Argument(_) | Error::Unsupported(_) => 2,
            Error::MissingColumn(_)
            | Error::Parse { .. }
            | Error::Domain { .. }
            | Error::Fit(_)
            | Error::Csv(_)
            | Error::Json(_) => 3,
            Error::Infeasible(_) | Error::Capacity(_) => 4,
            Error::Io { .. } => 1,
        }
    }
}
