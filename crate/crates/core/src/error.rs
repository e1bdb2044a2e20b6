use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised by the library.
///
/// Variants fall in two families, see [`Error::is_numerical`]: validation
/// problems with inputs (shapes, labels, files, configs) and numerical
/// failures where a quantity is mathematically undefined for the data.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid point cloud: {0}")]
    InvalidCloud(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid labels: {0}")]
    InvalidLabels(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("{0} requires a single-label assignment")]
    MultiLabelUnsupported(&'static str),

    #[error("cost is undefined for an empty set of points")]
    EmptySet,

    #[error("silhouette undefined: need at least 2 distinct labels, found {0}")]
    SilhouetteUndefined(usize),

    #[error("variance vector is zero; isotropy undefined")]
    ZeroVariance,

    #[error("degenerate cloud: {0}")]
    Degenerate(String),

    #[error("eigendecomposition of the covariance matrix did not converge")]
    EigenNotConverged,

    #[error("no valid (anchor, positive, negative) triple exists")]
    NoValidTriplet,

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(&'static str),

    #[error("need >= {needed} observations, found {found}")]
    TooFewObservations { needed: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: record `{id}` has dimension {found}, expected {expected}")]
    RecordDimension {
        line: usize,
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures where the data is well-formed but a requested
    /// quantity is undefined or could not be computed.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance
                | Error::Degenerate(_)
                | Error::EigenNotConverged
                | Error::UndefinedCorrelation(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
