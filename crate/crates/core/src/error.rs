use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero-length polyline")]
    ZeroLengthPolyline,
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point count mismatch: {left} vs {right}")]
    PointCountMismatch { left: usize, right: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid rigid transform: {0}")]
    InvalidTransform(String),
    #[error("frames not aligned; missing: {}", .missing.join(", "))]
    FrameMismatch { missing: Vec<String> },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("infeasible request: {0}")]
    Infeasible(String),
    #[error("raster resolution mismatch: {0} vs {1}")]
    ResolutionMismatch(f64, f64),
    #[error("bad file format: {0}")]
    Format(String),
    #[error("missing tensor `{0}`")]
    MissingTensor(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
