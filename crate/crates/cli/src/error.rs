use std::fmt;

/// Pipeline stage an error is attributed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Analysis,
    Synthesis,
    Mixdown,
    Output,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Analysis => "analysis",
            Stage::Synthesis => "synthesis",
            Stage::Mixdown => "mixdown",
            Stage::Output => "output",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub stage: Stage,
    /// Process exit code: 1 for pipeline failures, 2 for usage and I/O.
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(stage: Stage, message: impl Into<String>) -> Self {
        Self {
            stage,
            code: 2,
            message: message.into(),
        }
    }

    pub fn from_core(stage: Stage, err: dsson_core::Error) -> Self {
        let code = match err {
            dsson_core::Error::Io { .. } => 2,
            dsson_core::Error::Wav(hound_err) => {
                return Self {
                    stage,
                    code: 2,
                    message: hound_err.to_string(),
                }
            }
            _ => 1,
        };
        let message = match err.segment() {
            Some(i) if !err.to_string().contains("segment") => format!("segment {i}: {err}"),
            _ => err.to_string(),
        };
        Self {
            stage,
            code,
            message,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage `{}`: {}", self.stage.as_str(), self.message)
    }
}

impl std::error::Error for CliError {}

pub trait StageContext<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError>;
}

impl<T> StageContext<T> for dsson_core::Result<T> {
    fn stage(self, stage: Stage) -> Result<T, CliError> {
        self.map_err(|e| CliError::from_core(stage, e))
    }
}
