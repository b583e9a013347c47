//! Config-driven runner behind the `gdrisk` binary.
//!
//! Every command reads one JSON config, writes `result.csv`, any
//! `plotdata_*.csv` series and a `run.json` record of the fully resolved run
//! into the output directory.
//!
//! Exit codes: 0 success, 2 invalid config or arguments, 3 runtime guard or
//! I/O failure.

use std::io;
use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod output;
pub mod validate;

use config::{Command, Overrides, Resolved, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("cannot read {path}: {source}", path = .0.display(), source = .1)]
    Unreadable(PathBuf, #[source] io::Error),
    #[error("cannot write {path}: {source}", path = .0.display(), source = .1)]
    Io(PathBuf, #[source] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Core(#[from] gdrisk_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Unreadable(..) => 2,
            CliError::Core(e) if e.is_guard() || matches!(e, gdrisk_core::Error::Decomposition) => 3,
            CliError::Core(_) => 2,
            CliError::Io(..) | CliError::Csv(_) => 3,
        }
    }
}

/// Resolve, run and write one command. Returns the written paths.
pub fn run(command: Command, config_path: &Path, overrides: &Overrides) -> Result<Vec<PathBuf>, CliError> {
    let config = RunConfig::load(config_path)?;
    let resolved = Resolved::new(command, &config, overrides)?;
    let problem = commands::build_problem(&resolved)?;
    let diags = validate::validate_config(command, &config);
    validate::into_result(&diags)?;
    for d in &diags {
        eprintln!("{d}");
    }
    let mut artifacts = commands::execute(&resolved, problem.as_ref())?;
    artifacts.json.push(("run.json".into(), run_record(&resolved)?));
    artifacts.write(&resolved.output_dir)
}

fn run_record(resolved: &Resolved) -> Result<serde_json::Value, CliError> {
    let mut record = serde_json::to_value(resolved).map_err(gdrisk_core::Error::from)?;
    record["version"] = gdrisk_core::VERSION.into();
    Ok(record)
}

/// `gdrisk validate`: print every diagnostic, fail if any is an error.
pub fn run_validate(config_path: &Path) -> Result<Vec<validate::Diagnostic>, CliError> {
    let diags = validate::validate_file(config_path);
    validate::into_result(&diags)?;
    Ok(diags)
}
