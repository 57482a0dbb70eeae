use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {index}")]
    NonFinite { index: usize },
    #[error("invalid count {count}: expected {expected}")]
    InvalidCount { count: usize, expected: String },
    #[error("cardinality mismatch: {left} vs {right} points")]
    CardinalityMismatch { left: usize, right: usize },
    #[error("instance of {size} points exceeds the exact solver limit of {limit}")]
    SizeLimitExceeded { size: usize, limit: usize },
    #[error("insufficient points: need {needed}, have {available}")]
    InsufficientPoints { needed: usize, available: usize },
    #[error("shape mismatch: {left} vs {right} entries")]
    ShapeMismatch { left: usize, right: usize },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
}

impl Error {
    /// Stable variant name, used when errors cross a process or language boundary.
    pub fn name(&self) -> &'static str {
        match self {
            Error::EmptyCloud => "EmptyCloud",
            Error::NonFinite { .. } => "NonFinite",
            Error::InvalidCount { .. } => "InvalidCount",
            Error::CardinalityMismatch { .. } => "CardinalityMismatch",
            Error::SizeLimitExceeded { .. } => "SizeLimitExceeded",
            Error::InsufficientPoints { .. } => "InsufficientPoints",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::InvalidParam(_) => "InvalidParam",
        }
    }
}
