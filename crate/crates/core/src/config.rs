//! Single TOML configuration file shared by every command, one section per
//! concern. Missing sections and keys take their documented defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::DEFAULT_BOND_SCALE;
use crate::policy::{GrpoConfig, MmtgConfig};
use crate::reward::{PhysConfig, RewardWeights};
use crate::search::{PairPotentialSurrogate, SearchConfig};
use crate::textify::TextifyConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub bond_scale: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            bond_scale: DEFAULT_BOND_SCALE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidateConfig {
    /// Target composition formula, e.g. `"Cu4O"`.
    pub target: Option<String>,
}

/// Search inputs that are files rather than numbers.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchFiles {
    /// CIF the generator mutates when unconditioned.
    pub template: Option<String>,
    /// CIF whose surrogate energy becomes the target (overrides `search.target_energy`).
    pub target_structure: Option<String>,
    /// Target composition formula; defaults to the template's composition.
    pub target_composition: Option<String>,
    pub coord_jitter: Option<f64>,
    pub lattice_jitter: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub reward: RewardWeights,
    pub phys: PhysConfig,
    pub geometry: GeometryConfig,
    pub grpo: GrpoConfig,
    pub mmtg: MmtgConfig,
    pub textify: TextifyConfig,
    pub validate: ValidateConfig,
    pub search: SearchConfig,
    pub search_files: SearchFiles,
    pub surrogate: PairPotentialSurrogate,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: Config = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Config::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.phys.validate().map_err(|e| invalid(&e))?;
        self.grpo.validate().map_err(|e| invalid(&e))?;
        self.mmtg.validate().map_err(|e| invalid(&e))?;
        if !(self.geometry.bond_scale > 0.0 && self.geometry.bond_scale.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "geometry.bond_scale must be positive, got {}",
                self.geometry.bond_scale
            )));
        }
        if !(self.textify.bond_scale > 0.0 && self.textify.bond_scale.is_finite()) {
            return Err(ConfigError::Invalid(format!(
                "textify.bond_scale must be positive, got {}",
                self.textify.bond_scale
            )));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_from_empty_file() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg, Config::default());
        assert_eq!(cfg.reward.comp(), 0.6);
        assert_eq!(cfg.search.iterations, 10);
        assert_eq!(cfg.grpo.beta, 0.1);
        assert_eq!(cfg.textify.separator, "</s>");
    }

    #[test]
    fn sections_override_defaults() {
        let cfg = Config::from_toml(
            "[reward]\ncomp = 0.25\nparse = 0.25\nvalid = 0.25\nphys = 0.25\n[search]\niterations = 3\nseed = 9\n[mmtg]\nlambda = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.reward.phys(), 0.25);
        assert_eq!(cfg.search.iterations, 3);
        assert_eq!(cfg.search.pool_capacity, 8);
        assert_eq!(cfg.mmtg.lambda, 0.5);
        let back = Config::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(Config::from_toml("[reward]\ncomp = 0.9\nparse = 0.2\nvalid = 0.1\nphys = 0.1\n").is_err());
        assert!(Config::from_toml("[mmtg]\nlambda = 2.0\n").is_err());
        assert!(Config::from_toml("[phys]\nhard_overlap_fraction = 0.9\n").is_err());
        assert!(Config::from_toml("[nonsense]\nx = 1\n").is_err());
    }
}
