//! Crate-wide error type.
//!
//! Variants are grouped by who is at fault: bad configuration, bad input
//! data, or an internal invariant failure. [`Error::exit_code`] maps the
//! groups onto the CLI exit-code contract (1 config, 2 data, 3 internal).

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // --- configuration / parameter errors (exit code 1) ---
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unknown wavelet family `{0}`")]
    UnknownFamily(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("protocol error: {0}")]
    Protocol(String),

    // --- data errors (exit code 2) ---
    #[error("{path}: malformed WAV: {reason}")]
    WavFormat { path: PathBuf, reason: String },
    #[error("{path}: unsupported codec (format tag {tag}, {bits} bits)")]
    UnsupportedCodec { path: PathBuf, tag: u16, bits: u16 },
    #[error("empty signal in {0}")]
    EmptySignal(PathBuf),
    #[error("manifest {path} has no valid entries")]
    EmptyManifest { path: PathBuf },
    #[error("duplicate path in manifest: {0}")]
    DuplicatePath(String),
    #[error("input too short: {0}")]
    TooShort(String),
    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("need at least two classes, got {0}")]
    InsufficientClasses(usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("unknown emotion label `{0}`")]
    UnknownEmotion(String),
    #[error("model error: {0}")]
    Model(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: parse error: {reason}")]
    Parse { path: PathBuf, reason: String },

    // --- internal errors (exit code 3) ---
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// CLI exit code: 0 success, 1 config error, 2 data error, 3 internal.
    pub fn exit_code(&self) -> i32 {
        use Error::*;
        match self {
            Parameter(_) | UnknownFamily(_) | Config(_) | Protocol(_) => 1,
            Internal(_) => 3,
            _ => 2,
        }
    }
}
