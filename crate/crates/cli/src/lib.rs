//! Configuration-driven front end: one subcommand per stage, CSV out.

pub mod commands;
pub mod config;
mod csvout;

pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dfgamp::Error),
    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    /// 2 config, 3 numerical convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 4,
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(dfgamp::Error::Io(_) | dfgamp::Error::Format(_)) => 4,
            CliError::Core(_) => 2,
        }
    }
}
