use std::path::PathBuf;

/// Process exit status for a finished command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    EstimateViolation,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::EstimateViolation => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Config { path: PathBuf, message: String },
    #[error("invalid input: {0}")]
    Input(String),
    #[error("solver failure: {0}")]
    Solver(jko_core::Error),
}

impl ToolError {
    /// 1 for anything the caller supplied, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Solver(_) => 2,
            _ => 1,
        }
    }

    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| ToolError::Io { path, source }
    }
}

impl From<jko_core::Error> for ToolError {
    fn from(e: jko_core::Error) -> Self {
        use jko_core::Error as E;
        match e {
            E::NotConverged { .. }
            | E::NaN(_)
            | E::NonInjective { .. }
            | E::Continuation { .. }
            | E::LinearSolve(_)
            | E::IndefiniteEigenvector => ToolError::Solver(e),
            other => ToolError::Input(other.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, ToolError>;
