use std::path::PathBuf;

use thiserror::Error;

/// Every failure carries the `module::operation` that raised it.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: invalid configuration: {msg}")]
    InvalidConfig { op: &'static str, msg: String },

    #[error("{op}: invalid input: {msg}")]
    InvalidInput { op: &'static str, msg: String },

    #[error("{op}: invalid slice: {msg}")]
    InvalidSlice { op: &'static str, msg: String },

    #[error("{op}: invalid state: {msg}")]
    InvalidState { op: &'static str, msg: String },

    #[error("{op}: {path}:{line}: {msg}")]
    Parse {
        op: &'static str,
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("{op}: empty dataset: {msg}")]
    EmptyDataset { op: &'static str, msg: String },

    #[error("ingest::inject_social_noise: cannot inject {requested} edges, only {available} non-edges remain")]
    CannotInject { requested: usize, available: usize },

    #[error("denoise::empirical_cdf: user {user} has no unobserved users, cdf undefined")]
    UndefinedCdf { user: usize },

    #[error("denoise::posterior: prior {0} outside the open interval (0, 1)")]
    InvalidPrior(f64),

    #[error("trainer::adam_step: non-finite gradient in {param} at step {step}")]
    NonFinite {
        param: &'static str,
        step: u64,
        /// Offending batch, so callers can dump it.
        batch: Option<Box<Vec<(usize, usize, usize)>>>,
    },

    #[error("{op}: missing snapshot: {path}")]
    MissingSnapshot { op: &'static str, path: PathBuf },

    #[error("{op}: {path}: {source}")]
    Io {
        op: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidConfig {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn input(op: &'static str, msg: impl Into<String>) -> Self {
        Error::InvalidInput {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(op: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            op,
            path: path.into(),
            source,
        }
    }

    /// Whether this error stems from bad user input rather than a runtime fault.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
