//! Experiment runner: run configuration, archive format and the
//! simulate / track / evaluate / sweep pipeline behind the `dtrack` binary.

pub mod archive;
pub mod config;
pub mod run;

pub use config::RunConfig;
pub use run::{evaluate, simulate, sweep, track, TrackerKind, TRACKERS};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid or unreadable configuration, unknown names, bad flags.
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError::Config(message.into())
    }

    /// 2 for configuration errors, 3 for failures while running.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<dtrack_core::Error> for CliError {
    fn from(e: dtrack_core::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
