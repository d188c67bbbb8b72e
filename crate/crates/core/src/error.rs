use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("checksum mismatch: header says {expected}, payload hashes to {actual}")]
    Checksum { expected: String, actual: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("numerical instability at t = {time:.6} s (|state| = {magnitude:e}); reduce the internal step")]
    Unstable { time: f64, magnitude: f64 },

    #[error("no contact detected")]
    NoContact,

    #[error("force trace is all zero")]
    ForceAllZero,

    #[error("all samples invalid")]
    AllInvalid,

    #[error("zero-variance input")]
    ZeroVariance,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("all {0} search trials diverged")]
    SearchExhausted(usize),

    #[error("empty input: {0}")]
    Empty(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short stable tag for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Format(_) => "format",
            Error::Version { .. } => "version",
            Error::Checksum { .. } => "checksum",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidModel(_) => "invalid-model",
            Error::Unstable { .. } => "unstable",
            Error::NoContact => "no-contact",
            Error::ForceAllZero => "force-all-zero",
            Error::AllInvalid => "all-invalid",
            Error::ZeroVariance => "zero-variance",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non-finite",
            Error::Diverged { .. } => "diverged",
            Error::SearchExhausted(_) => "search-exhausted",
            Error::Empty(_) => "empty",
        }
    }
}
