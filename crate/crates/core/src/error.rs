use alloc::string::String;
use core::fmt;

/// Errors surfaced by the numerical core.
#[derive(Debug, Clone, PartialEq)]
pub enum TomoError {
    /// A precondition on an argument was violated.
    InvalidInput(String),
    /// Two containers that must share a shape do not.
    ShapeMismatch(String),
    /// Poisson dose normalization is undefined on a zero-dynamic-range series.
    DegenerateDoseNormalization,
    /// Z-score feature normalization is undefined on a zero-variance series.
    DegenerateNormalization,
}

impl fmt::Display for TomoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TomoError::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            TomoError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            TomoError::DegenerateDoseNormalization => write!(f, "degenerate dose normalization"),
            TomoError::DegenerateNormalization => write!(f, "degenerate normalization"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TomoError {}

pub type Result<T> = core::result::Result<T, TomoError>;
