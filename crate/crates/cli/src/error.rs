use thiserror::Error;

/// Failure of a CLI invocation, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("pipeline error: {0}")]
    Pipeline(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Pipeline(_) => 3,
        }
    }

    /// Tags a library error with the stage that raised it.
    pub fn stage(stage: &str, e: clusterplot::Error) -> Self {
        let msg = format!("{stage}: {e}");
        match e {
            clusterplot::Error::Param(_) => CliError::Config(msg),
            e if e.is_data_error() => CliError::Data(msg),
            _ => CliError::Pipeline(msg),
        }
    }
}
