use std::path::PathBuf;

use thiserror::Error;

use crate::network::BusId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {msg}")]
    Parse { path: PathBuf, line: u64, msg: String },

    #[error("invalid network: {0}")]
    Validation(String),

    #[error("unknown bus {0}")]
    UnknownBus(BusId),

    #[error("bus {0} is the slack bus and cannot host a DG injection")]
    SlackBus(BusId),

    #[error("candidate out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate baseline: {0}")]
    DegenerateBaseline(String),

    #[error("base-case load flow did not converge after {0} iterations")]
    BaseCaseDiverged(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
