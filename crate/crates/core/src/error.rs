use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("unknown config key `{key}` (line {line})")]
    UnknownKey { key: String, line: usize },

    #[error("config value out of range for `{key}`: {msg}")]
    Range { key: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is rank deficient (estimated condition number {condition:.3e})")]
    RankDeficient { condition: f64 },

    #[error("angle undefined: zero-magnitude argument at RIS {ris}, element {element}")]
    UndefinedAngle { ris: usize, element: usize },

    #[error("correlation matrix of RIS {ris} is singular (condition {condition:.3e})")]
    SingularCorrelation { ris: usize, condition: f64 },

    #[error("BS-RIS-ZF requires exactly one blocked UE per RIS (RIS {ris} has {count})")]
    NotSingleUserPerRis { ris: usize, count: usize },

    #[error("beamformer has zero Frobenius norm; cannot normalize power")]
    ZeroPower,

    #[error("{path}: {source}")]
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

    pub(crate) fn range(key: &str, msg: impl Into<String>) -> Self {
        Error::Range {
            key: key.to_string(),
            msg: msg.into(),
        }
    }
}
