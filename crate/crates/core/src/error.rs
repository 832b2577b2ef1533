use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("closest point on the boundary is not unique near ({0}, {1})")]
    AmbiguousProjection(f64, f64),

    #[error("degenerate element {element}: signed area {area:e}")]
    DegenerateElement { element: usize, area: f64 },

    #[error("boundary edge has zero length")]
    ZeroLengthEdge,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("problem variant requires `{0}` but it was not supplied")]
    MissingField(&'static str),

    #[error("exact solution lacks the gradient callable `{0}`")]
    MissingGradient(&'static str),

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("stage matrix is singular")]
    SingularStageMatrix,

    #[error("iterative solver did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("errors must be positive for order estimation, got {0:e}")]
    NonPositiveError(f64),

    #[error("meshes are not levels of the same hierarchy: {0}")]
    HierarchyMismatch(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input (bad configuration, unknown
    /// names, malformed files) rather than by the numerics.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidArgument(_)
                | Error::MissingField(_)
                | Error::MissingGradient(_)
                | Error::Unsupported(_)
                | Error::UnknownScenario(_)
                | Error::Config(_)
                | Error::Parse { .. }
        )
    }
}
