//! Scenario runner for `rhodyn`: parses a configuration, runs one named
//! scenario and writes CSV series and state dumps for offline plotting.

pub mod config;
pub mod output;
pub mod scenario;

use std::path::{Path, PathBuf};

pub use config::{parse_config, parse_config_with, ConfigErrors, Overrides, Scenario, ScenarioConfig};
pub use scenario::{run_scenario, Summary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(#[from] ConfigErrors),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("simulation failed: {0}")]
    Sim(#[from] rhodyn::Error),
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
