use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Io,
    Computation,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("duplicate building id {0:?}")]
    DuplicateId(String),

    #[error("no roads of class {0:?} available")]
    NoRoads(crate::geocore::RoadClass),

    #[error("point cloud contains no building points")]
    NoBuildingPoints,

    #[error("building {0:?} has no roof cells")]
    NoRoofCells(String),

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("variogram fit needs at least 3 nonempty lag bins, got {0}")]
    TooFewBins(usize),

    #[error("singular kriging system; coincident samples {0:?}")]
    SingularKriging(Vec<usize>),

    #[error("point ({x}, {y}) lies outside the surface extent")]
    OutsideSurface { x: f64, y: f64 },

    #[error("total population is zero")]
    ZeroPopulation,

    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),

    #[error("missing artifact {}; run `greenprior {stage}` first", path.display())]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Invalid(_) | Error::Config(_) | Error::DuplicateId(_) => ErrorKind::Validation,
            Error::MissingArtifact { .. } | Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Computation,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
