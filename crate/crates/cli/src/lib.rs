//! Configuration and task pipelines behind the `polariton` binary.

pub mod config;
pub mod run;

use std::path::Path;

pub use config::{RunConfig, RunMethod, Task};
pub use run::Summary;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical guard: {0}")]
    Guard(String),
    #[error(transparent)]
    Engine(#[from] polariton::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for configuration problems, 1 for everything raised while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Reads, resolves and runs a configuration file.
pub fn run_file(task: Task, config: &Path, out: Option<&Path>) -> Result<Summary, CliError> {
    let text = std::fs::read_to_string(config)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", config.display())))?;
    let cfg = RunConfig::parse(&text)?.resolve(task)?;
    run::run(&cfg, task, out)
}
