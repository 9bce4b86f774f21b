use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures raised anywhere in the pipeline.
///
/// Variants are grouped so that a front end can map them onto coarse exit
/// classes: configuration, data, and numeric failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error at line {line}{}: {msg}", column.map(|c| format!(", column {c}")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<usize>,
        msg: String,
    },

    #[error("folding error: class {class} has {count} samples, need at least {needed}")]
    Folding {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("join error: {0}")]
    Join(String),

    #[error("numeric failure in {layer}: {msg}")]
    Numeric { layer: String, msg: String },

    #[error(transparent)]
    Container(#[from] ContainerError),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn numeric(layer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numeric {
            layer: layer.into(),
            msg: msg.into(),
        }
    }
}

/// Problems decoding a binary parameter container.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("not a leafnet container (bad magic bytes)")]
    BadMagic,

    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("container truncated while reading {0}")]
    Truncated(&'static str),

    #[error("checksum mismatch: container is corrupted")]
    Checksum,

    #[error("container holds a `{found}` payload, expected `{expected}`")]
    KindMismatch { found: String, expected: String },

    #[error("config mismatch: {0}")]
    ConfigMismatch(String),

    #[error("malformed container: {0}")]
    Malformed(String),
}
