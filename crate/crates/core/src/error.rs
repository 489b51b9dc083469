use std::io;
use std::path::PathBuf;

/// Errors produced by the simulator, the metrics and the dataset formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("lump placement failed after {0} attempts")]
    LumpPlacement(usize),

    #[error("body has no lump")]
    NoLump,

    #[error("image has no lump pixels")]
    EmptyLump,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("format error: {0}")]
    Format(#[from] FormatError),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

/// Failures when decoding one of the binary file formats.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FormatError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unexpected header field {field} = {value}")]
    BadHeader { field: &'static str, value: u32 },
    #[error("truncated: expected {expected} bytes, got {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} trailing bytes")]
    TrailingBytes(usize),
    #[error("non-finite value at offset {0}")]
    NonFinite(usize),
    #[error("invalid class byte {value} at pixel {index}")]
    BadClass { index: usize, value: u8 },
    #[error("invalid converged flag {value} at step {index}")]
    BadFlag { index: usize, value: u8 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
