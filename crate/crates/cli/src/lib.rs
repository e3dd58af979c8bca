//! Command implementations behind the `stems` binary. Each `cmd_*`
//! function is usable on its own; the binary only parses flags and maps
//! errors to exit codes.

mod audit;
mod config;
mod data;
mod eval;
mod export;
mod train;

pub use audit::{cmd_shield_audit, read_actions_csv, ActionRow, AuditRow, AuditSummary};
pub use config::{Overrides, RunConfig, DEFAULT_OUT_DIR, OUT_DIR_ENV};
pub use data::cmd_gen_data;
pub use eval::{cmd_eval, EvalOptions, EvalReport};
pub use export::{cmd_export, ExportKind, ExportOptions};
pub use train::{cmd_train, AggregateRow, SeedOutcome, TrainOptions, TrainReport, CHECKPOINT_FILE, LOG_FILE, TIMING_FILE};

use stems::agent::{AgentError, CheckpointError};
use stems::graph::GraphError;
use stems::sim::SimError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("checkpoint does not match the configuration: {0}")]
    CheckpointMismatch(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// `2` for anything the user can fix in the configuration, `1` otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Agent(AgentError::Config(_) | AgentError::Graph(GraphError::Config(_))) => 2,
            CliError::Sim(SimError::InvalidSpec(_) | SimError::Config(_)) => 2,
            CliError::Agent(AgentError::Sim(SimError::InvalidSpec(_) | SimError::Config(_))) => 2,
            _ => 1,
        }
    }
}

/// Write `bytes` to `path` through a temporary sibling so readers never see
/// a partial file.
pub(crate) fn write_atomic(path: &std::path::Path, bytes: &[u8]) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
