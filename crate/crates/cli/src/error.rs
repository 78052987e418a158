use std::io;

use epde_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// A configuration value is missing, malformed or inconsistent.
    #[error("{field}: {message}")]
    Field { field: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Field {
            field: field.into(),
            message: message.into(),
        }
    }

    /// 2 for invalid input, 1 for failures during the computation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Field { .. } | CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                CoreError::NoConvergence { .. }
                | CoreError::Singular { .. }
                | CoreError::PicardDiverged { .. }
                | CoreError::Overflow(_) => 1,
                _ => 2,
            },
            CliError::Io { .. } => 1,
        }
    }
}
