//! Config files. Scenarios are TOML documents whose keys mirror
//! [`Scenario`]; a suite file picks threats, repetitions and a seed.

use std::path::Path;

use serde::Deserialize;

use edgecheck::simnet::{Scenario, ThreatId};

use crate::CliError;

/// `threat-matrix --config` file.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub seed: u64,
    pub reps: u32,
    /// Defaults to every threat.
    pub threats: Vec<ThreatId>,
    /// Also run the honest control row.
    pub honest_control: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self { seed: 1, reps: 100, threats: ThreatId::ALL.to_vec(), honest_control: true }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))
}

pub fn load_scenario(path: &Path) -> Result<Scenario, CliError> {
    let text = read(path)?;
    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn load_suite(path: &Path) -> Result<SuiteConfig, CliError> {
    let text = read(path)?;
    let cfg: SuiteConfig = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.threats.is_empty() {
            return Err(CliError::Config("threat list is empty".into()));
        }
        if self.threats.contains(&ThreatId::Honest) {
            return Err(CliError::Config("use honest_control for the honest row, not the threat list".into()));
        }
        if self.reps == 0 {
            return Err(CliError::Config("reps must be positive".into()));
        }
        Ok(())
    }
}
