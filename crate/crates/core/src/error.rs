use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the pipeline.
///
/// The variants map onto process exit codes via [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent shapes, schedules or settings.
    #[error("configuration error: {0}")]
    Config(String),
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// A function was called outside its mathematical domain (e.g. an empty point set).
    #[error("domain error: {0}")]
    Domain(String),
    /// A broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
    /// Training produced a non-finite loss.
    #[error("training diverged at epoch {epoch}, step {step}: loss = {loss}")]
    Diverged { epoch: usize, step: usize, loss: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for data and I/O problems, 2 for configuration, 3 for internal failures.
    /// Prefixes the message with `ctx`. I/O and JSON failures become data errors.
    pub fn context(self, ctx: impl std::fmt::Display) -> Self {
        match self {
            Error::Config(m) => Error::Config(format!("{ctx}: {m}")),
            Error::Data(m) => Error::Data(format!("{ctx}: {m}")),
            Error::Domain(m) => Error::Domain(format!("{ctx}: {m}")),
            Error::Internal(m) => Error::Internal(format!("{ctx}: {m}")),
            e @ (Error::Io { .. } | Error::Json(_)) => Error::Data(format!("{ctx}: {e}")),
            e @ Error::Diverged { .. } => e,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Data(_) | Error::Domain(_) | Error::Io { .. } | Error::Json(_) => 1,
            Error::Config(_) | Error::Diverged { .. } => 2,
            Error::Internal(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
