//! `manifest.toml`: everything needed to rerun a command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adaptive::AdaptiveConfig;
use crate::error::{LswError, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Estimate,
    Montecarlo,
    Identities,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Estimate => "estimate",
            Command::Montecarlo => "montecarlo",
            Command::Identities => "identities",
        }
    }
}

/// Deliberate corruptions for exercising the self-checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    /// Flip the sign of `Psi_{-1}(1)`, leaving `Psi_{-1}(-1)` alone.
    PsiSign,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: Command,
    pub spec: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub seed: u64,
    pub t: usize,
    pub reps: usize,
    pub out: PathBuf,
    pub scales: Vec<i32>,
    pub points: usize,
    /// Scale count of the identity checks.
    pub levels: usize,
    /// Worker threads; 0 lets the pool decide. Outputs do not depend on it.
    pub threads: usize,
    pub dump_periodogram: bool,
    pub baseline_bandwidth: Option<usize>,
    pub fault: Option<Fault>,
    pub config: AdaptiveConfig,
}

impl RunManifest {
    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(LswError::Config("replications must be at least 1".into()));
        }
        self.config.validate()
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| LswError::Internal(format!("manifest serialization: {e}")))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let m: Self = toml::from_str(text).map_err(|e| LswError::Input(format!("manifest: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, self.to_toml()?).map_err(|e| LswError::Input(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LswError::Input(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        RunManifest {
            command: Command::Montecarlo,
            spec: Some("/tmp/a.spec".into()),
            input: None,
            seed: 7,
            t: 1000,
            reps: 100,
            out: "out".into(),
            scales: vec![-1],
            points: 39,
            levels: 10,
            threads: 4,
            dump_periodogram: false,
            baseline_bandwidth: None,
            fault: None,
            config: AdaptiveConfig { c2: Some(0.125), kt: Some(9.5), ..AdaptiveConfig::default() },
        }
    }

    #[test]
    fn toml_round_trip() {
        let m = sample();
        let back = RunManifest::from_toml(&m.to_toml().unwrap()).unwrap();
        assert_eq!(back, m);
        let m2 = RunManifest { fault: Some(Fault::PsiSign), config: AdaptiveConfig::default(), ..sample() };
        assert_eq!(RunManifest::from_toml(&m2.to_toml().unwrap()).unwrap(), m2);
    }

    #[test]
    fn unknown_keys_are_refused() {
        let text = sample().to_toml().unwrap() + "bogus = 1\n";
        assert!(RunManifest::from_toml(&text).is_err());
    }
}
