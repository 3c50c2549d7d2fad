use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("points do not form a convex quadrilateral")]
    NonConvex,
    #[error("quadrilateral edges self-intersect")]
    NotSimple,
    #[error("shrunk quadrilateral collapsed")]
    Degenerate,
    #[error("invalid ratio {0}: expected a value in [0, 0.5)")]
    InvalidRatio(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing files for stems: {}", .0.join(", "))]
    MissingFile(Vec<String>),
    #[error("{0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
