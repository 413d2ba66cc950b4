use std::path::Path;

use thiserror::Error;

/// Harness failures, each mapped to a process exit code.
#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

impl HarnessError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        HarnessError::Io(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Io(_) => 3,
            HarnessError::Numerical(_) => 4,
        }
    }
}

impl From<neurolife::Error> for HarnessError {
    fn from(e: neurolife::Error) -> Self {
        use neurolife::Error as E;
        match e {
            E::InvalidArgument(_) | E::Json(_) => HarnessError::Config(e.to_string()),
            E::Io(_) | E::Format(_) | E::Consistency(_) => HarnessError::Io(e.to_string()),
            _ => HarnessError::Numerical(e.to_string()),
        }
    }
}
