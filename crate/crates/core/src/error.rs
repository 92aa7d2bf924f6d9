use std::path::PathBuf;

use crate::model::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("instance too large for exact search: {states:e} joint states exceed the limit of {limit:e}")]
    InstanceTooLarge { states: f64, limit: f64 },
    #[error("unknown pattern node {0}")]
    UnknownNode(NodeId),
    #[error("assignment has no entry for pattern node {0}")]
    MissingAssignment(NodeId),
    #[error("pattern node {0} has no outgoing edges to normalize by")]
    ZeroOutDegree(NodeId),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("{0} ARGs supplied but {1} assignments")]
    CountMismatch(usize, usize),
    #[error("assignment matches no pattern node to an ARG node")]
    DegenerateSample,
    #[error("all positive ARGs were filtered out at iteration {0}")]
    AllFiltered(usize),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
