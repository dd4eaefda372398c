use std::fmt;

/// Process-level failure classes, mapped onto the exit-code contract:
/// 0 success, 2 unusable input or flags, 3 a pipeline stage failed.
#[derive(Debug)]
pub enum CliError {
    /// Missing, unreadable, or malformed input; bad flag combinations.
    Input(String),
    /// A stage started with valid inputs and failed while running.
    Stage { stage: &'static str, message: String },
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn stage(stage: &'static str, err: impl fmt::Display) -> Self {
        CliError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Stage { .. } => 3,
        }
    }

    pub fn stage_name(&self) -> Option<&'static str> {
        match self {
            CliError::Input(_) => None,
            CliError::Stage { stage, .. } => Some(stage),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(message) => write!(f, "{message}"),
            CliError::Stage { stage, message } => write!(f, "stage {stage}: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;

/// Wraps an I/O error with the path it concerns; bare `io::Error` messages
/// do not name the file.
pub fn io_input(path: &std::path::Path, err: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {err}", path.display()))
}
