use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("dataset carries no noise record")]
    MissingNoiseRecord,
    #[error("gradient descent diverged at iteration {iteration} (non-finite {quantity})")]
    Diverged {
        iteration: usize,
        quantity: &'static str,
        /// Last iterate with all-finite entries.
        last_finite: Box<crate::numerics::Matrix>,
    },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
