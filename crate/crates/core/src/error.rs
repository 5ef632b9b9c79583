use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid base problem: {0}")]
    InvalidProblem(String),

    #[error("invalid antigen: {0}")]
    InvalidAntigen(String),

    #[error("invalid antibody: {0}")]
    InvalidAntibody(String),

    #[error("antibody pool is empty")]
    EmptyPool,

    #[error("pool holds {available} antibodies but {requested} were requested")]
    PoolTooSmall { available: usize, requested: usize },

    #[error("antigen sample of size {requested} cannot be drawn from {available} antigens")]
    SampleTooLarge { available: usize, requested: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("total fitness before refinement is zero")]
    DegenerateFitness,

    #[error("replicate {replicate} failed: {source}")]
    Replicate {
        replicate: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
