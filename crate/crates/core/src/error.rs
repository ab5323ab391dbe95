use std::path::PathBuf;

use crate::morton::Axis;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("voxel coordinate {value} on the {axis} axis is outside the 21-bit key range")]
    KeyOutOfRange { axis: Axis, value: i64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("time step must be positive and at most 0.1 s, got {0}")]
    InvalidTimeStep(f64),

    #[error("static initialization failed: {0}")]
    InitFailure(String),

    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    #[error("no pose pairs within {max_dt} s")]
    NoAssociation { max_dt: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

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
