use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("open boundary: edge ({0}, {1}) belongs to a single triangle")]
    OpenBoundary(usize, usize),

    #[error("non-manifold edge ({a}, {b}) shared by {count} triangles")]
    NonManifoldEdge { a: usize, b: usize, count: usize },

    #[error("inconsistent orientation: edge ({0}, {1}) traversed twice in the same direction")]
    InconsistentOrientation(usize, usize),

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("vertex index {index} out of range in triangle {triangle}")]
    VertexIndex { triangle: usize, index: usize },

    #[error("level out of range: {0} (maximum 7)")]
    LevelOutOfRange(u32),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coincident points: kernel is singular at r = r'")]
    CoincidentPoints,

    #[error("too many panels: {count} exceeds limit {limit}")]
    TooManyPanels { count: usize, limit: usize },

    #[error("too few panels: {0} (need at least 4)")]
    TooFewPanels(usize),

    #[error("eigensolver did not converge{}", index.map(|i| format!(" (eigenvalue {i})")).unwrap_or_default())]
    NoConvergence { index: Option<usize> },

    #[error("pole of the permittivity map at {0}")]
    Pole(f64),

    #[error("no modes retained after filtering")]
    NoModes,

    #[error("tail fit needs at least 3 points, got {0}")]
    TooFewClusters(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit status classes for front ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Io,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => ErrorClass::Io,
            Error::NoConvergence { .. } | Error::NoModes | Error::TooFewClusters(_) => {
                ErrorClass::Numerical
            }
            _ => ErrorClass::Input,
        }
    }
}
