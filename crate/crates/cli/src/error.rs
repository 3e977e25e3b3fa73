use thiserror::Error;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config keys, or input files.
    #[error("config error: {0}")]
    Config(String),
    /// A computation failed after the inputs were accepted.
    #[error("runtime error: {0}")]
    Runtime(String),
    /// A property suite reported violations.
    #[error("property check failed: {0}")]
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) | CliError::Property(_) => EXIT_RUNTIME,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub(crate) fn input<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

pub(crate) fn runtime<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Runtime(format!("{context}: {e}"))
}
