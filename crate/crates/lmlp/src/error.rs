use std::fmt;
use std::path::PathBuf;

use lmlp_core::TomoError;

/// Tool-level errors carrying the process exit code policy:
/// 2 usage, 3 data/format, 4 numerical failure.
#[derive(Debug)]
pub enum ToolError {
    Usage(String),
    Data(String),
    Numeric(String),
    Io { path: PathBuf, source: std::io::Error },
}

impl ToolError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Usage(_) => 2,
            ToolError::Data(_) | ToolError::Io { .. } => 3,
            ToolError::Numeric(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> ToolError {
        let path = path.into();
        move |source| ToolError::Io { path, source }
    }
}

impl fmt::Display for ToolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToolError::Usage(msg) => write!(f, "usage error: {msg}"),
            ToolError::Data(msg) => write!(f, "{msg}"),
            ToolError::Numeric(msg) => write!(f, "numerical failure: {msg}"),
            ToolError::Io { path, source } => {
                write!(f, "{}: {source}", path.display())
            }
        }
    }
}

impl std::error::Error for ToolError {}

impl From<TomoError> for ToolError {
    fn from(e: TomoError) -> Self {
        match e {
            TomoError::DegenerateDoseNormalization | TomoError::DegenerateNormalization => {
                ToolError::Numeric(e.to_string())
            }
            other => ToolError::Data(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;
