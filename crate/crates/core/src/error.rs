use std::path::PathBuf;

/// Errors produced by the simulator and training harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid configuration or construction parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// A vector or matrix dimension does not match what the operation expects.
    #[error("dimension error: {0}")]
    Dimension(String),

    /// The integrator or a weight update produced a non-finite value.
    /// Runs abort with this diagnostic rather than clipping.
    #[error("numerical divergence: {0}")]
    Divergence(String),

    /// An operation was called in a state that does not permit it,
    /// e.g. stepping an episode that already ended.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// A file could not be parsed; `line` is 1-based.
    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }
}
