//! Campaign configuration: the single JSON file driving calibrate and bench.
//!
//! Relative paths inside the file resolve against the file's own directory,
//! so a campaign directory can be moved or checked in as a unit. The parsed
//! structure keeps the paths exactly as written; [`LoadedConfig`] carries the
//! resolution base alongside it.

use std::path::{Path, PathBuf};

use mesure::analysis::FilterPolicy;
use mesure::harness::CalibrationPolicy;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{field} refers to {path}, which does not exist")]
    MissingPath { field: &'static str, path: PathBuf },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Where the campaign talks to: a simulated card built from a local profile,
/// or a live benchmark service over TCP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DeviceEndpoint {
    Profile { profile: PathBuf },
    Tcp { endpoint: String },
}

fn default_repetitions() -> usize {
    mesure::harness::DEFAULT_REPETITIONS
}

fn default_n_sigma() -> f64 {
    FilterPolicy::default().n_sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub device: DeviceEndpoint,
    /// Loop-size calibration policy; missing fields take their defaults.
    #[serde(default)]
    pub calibration: CalibrationPolicy,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Half-width of the confidence filter, in standard deviations.
    #[serde(default = "default_n_sigma")]
    pub n_sigma: f64,
    pub suite: PathBuf,
    pub out_dir: PathBuf,
    /// Overrides the profile's own seed; TCP endpoints ignore it.
    #[serde(default)]
    pub rng_seed: Option<u64>,
}

impl CampaignConfig {
    pub fn filter_policy(&self) -> FilterPolicy {
        FilterPolicy { n_sigma: self.n_sigma, ..FilterPolicy::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.calibration.validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        self.filter_policy().validate().map_err(|err| ConfigError::Invalid(err.to_string()))?;
        if self.repetitions == 0 {
            return Err(ConfigError::Invalid("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

/// A parsed configuration plus the directory its relative paths resolve
/// against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: CampaignConfig,
    base_dir: PathBuf,
}

impl LoadedConfig {
    /// Reads and parses without validating, so callers can apply overrides
    /// first; [`LoadedConfig::finalize`] completes the checks.
    pub fn parse(path: &Path) -> Result<Self, ConfigError> {
        let raw = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        let config: CampaignConfig = serde_json::from_str(&raw)
            .map_err(|source| ConfigError::Parse { path: path.to_path_buf(), source })?;
        let base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
        Ok(Self { config, base_dir })
    }

    pub fn finalize(self) -> Result<Self, ConfigError> {
        self.config.validate()?;
        self.check_paths()?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(path)?.finalize()
    }

    fn check_paths(&self) -> Result<(), ConfigError> {
        let suite = self.suite_path();
        if !suite.is_file() {
            return Err(ConfigError::MissingPath { field: "suite", path: suite });
        }
        if let DeviceEndpoint::Profile { .. } = self.config.device {
            let profile = self.profile_path().expect("device is a profile");
            if !profile.is_file() {
                return Err(ConfigError::MissingPath { field: "device.profile", path: profile });
            }
        }
        Ok(())
    }

    fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn suite_path(&self) -> PathBuf {
        self.resolve(&self.config.suite)
    }

    /// `None` for TCP endpoints.
    pub fn profile_path(&self) -> Option<PathBuf> {
        match &self.config.device {
            DeviceEndpoint::Profile { profile } => Some(self.resolve(profile)),
            DeviceEndpoint::Tcp { .. } => None,
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.resolve(&self.config.out_dir)
    }
}
