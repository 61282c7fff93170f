//! Merged run configuration and file helpers.
//!
//! One TOML document drives every command; sections map onto the owning
//! modules' parameter structs and unknown keys are rejected everywhere.
//! Precedence is flags > file > defaults, applied by the CLI.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::dynamics::{ParamsError, VesselParams};
use crate::env::{EnvConfig, RewardParams};
use crate::rl::PPOConfig;
use crate::scenario::GenParams;
use crate::sensing::SensorConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Vessel(#[from] ParamsError),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// The full configuration tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; every stream (scenario, policy, shuffling) derives from
    /// it.
    pub seed: u64,
    /// Optional vessel parameter file; the shipped defaults apply otherwise.
    pub vessel_params: Option<PathBuf>,
    pub scenario: GenParams,
    pub sensors: SensorConfig,
    pub rewards: RewardParams,
    pub env: EnvConfig,
    pub ppo: PPOConfig,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg: RunConfig = toml::from_str(&text)?;
        Ok(cfg)
    }

    /// Cross-validates all sections and resolves the vessel parameters.
    pub fn validate(&self) -> Result<VesselParams, ConfigError> {
        let vessel = match &self.vessel_params {
            Some(path) => VesselParams::load(path)?,
            None => VesselParams::shipped_defaults(),
        };
        self.sensors
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.rewards
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.scenario
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ppo
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.env.timestep <= 0.0 {
            return Err(ConfigError::Invalid("env.timestep must be positive".into()));
        }
        Ok(vessel)
    }

    /// Serializes the effective configuration (echoed into output
    /// directories so runs stay reproducible from their artifacts).
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by an atomic rename, so failures never leave partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let tmp_name = format!(
        ".{}.tmp-{}",
        path.file_name().and_then(|n| n.to_str()).unwrap_or("out"),
        std::process::id()
    );
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => PathBuf::from(&tmp_name),
    };
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    match std::fs::rename(&tmp, path) {
        Ok(()) => Ok(()),
        Err(e) => {
            let _ = std::fs::remove_file(&tmp);
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = RunConfig::default();
        let vessel = cfg.validate().unwrap();
        assert_eq!(vessel.width, 4.0);
        assert_eq!(cfg.ppo.total_steps, 1_000_000);
        assert_eq!(cfg.scenario.n_obstacles, 20);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = RunConfig {
            seed: 17,
            ..RunConfig::default()
        };
        let text = cfg.to_toml();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_rejected() {
        let text = "seed = 1\nbogus = 2\n";
        assert!(toml::from_str::<RunConfig>(text).is_err());
        let nested = "[ppo]\nnot_a_field = true\n";
        assert!(toml::from_str::<RunConfig>(nested).is_err());
    }

    #[test]
    fn partial_file_fills_defaults() {
        let text = "[ppo]\ntotal_steps = 5000\n[scenario]\nn_obstacles = 6\n";
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.ppo.total_steps, 5000);
        assert_eq!(cfg.ppo.n_workers, 8);
        assert_eq!(cfg.scenario.n_obstacles, 6);
        assert_eq!(cfg.scenario.path_length, 400.0);
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("file.txt");
        write_atomic(&target, b"one").unwrap();
        write_atomic(&target, b"two").unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"two");
        let leftovers: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter_map(|e| e.ok())
            .filter(|e| e.file_name().to_string_lossy().contains("tmp"))
            .collect();
        assert!(leftovers.is_empty());
    }
}
