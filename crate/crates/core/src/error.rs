use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the domain of a special function.
    #[error("domain error: {0}")]
    Domain(String),

    /// Spherical/circular harmonic index outside `|m| <= n`.
    #[error("index error: n={n}, m={m} (need |m| <= n)")]
    Index { n: i64, m: i64 },

    #[error("order {requested} exceeds the supported cap of {cap}")]
    Cap { requested: usize, cap: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("order error: {0}")]
    Order(String),

    #[error("conditioning error: {0}")]
    Conditioning(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported codec: {0}")]
    UnsupportedCodec(String),

    #[error("corrupt header in {path}: {reason}")]
    CorruptHeader { path: PathBuf, reason: String },

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
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
