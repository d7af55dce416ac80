use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed or unsupported WAV input; `chunk` names the offending RIFF chunk.
    #[error("wav decode error in `{chunk}` chunk: {reason}")]
    Decode { chunk: String, reason: String },

    #[error("data error: {0}")]
    Data(String),

    /// One or more manifest entries failed; every failing path is listed.
    #[error("{} file(s) failed: {}", .0.len(), format_failures(.0))]
    Batch(Vec<(PathBuf, String)>),

    #[error("SMO did not converge after {iterations} iterations (last KKT gap {gap:.3e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model/cache format error: {0}")]
    Format(String),
}

fn format_failures(failures: &[(PathBuf, String)]) -> String {
    failures
        .iter()
        .map(|(p, e)| format!("{}: {}", p.display(), e))
        .collect::<Vec<_>>()
        .join("; ")
}

/// Coarse failure category, used for process exit codes and C error codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Convergence,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn decode(chunk: &str, reason: impl Into<String>) -> Self {
        Error::Decode {
            chunk: chunk.to_string(),
            reason: reason.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Argument(_) | Error::Config(_) => ErrorCategory::Config,
            Error::Decode { .. } | Error::Data(_) | Error::Batch(_) | Error::Format(_) => {
                ErrorCategory::Data
            }
            Error::Convergence { .. } => ErrorCategory::Convergence,
            Error::Io { .. } => ErrorCategory::Io,
        }
    }
}

impl ErrorCategory {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorCategory::Config => 2,
            ErrorCategory::Data => 3,
            ErrorCategory::Convergence => 4,
            ErrorCategory::Io => 5,
        }
    }
}
