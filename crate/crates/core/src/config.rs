//! Configuration files.
//!
//! A file may be JSON or TOML (chosen by extension, `.json` or anything
//! else as TOML) with four optional sections:
//!
//! ```toml
//! [run]        # n_agents, days, seed, seeds, condition, conditions, output_dir, t_test
//! [dynamics]   # DynamicsConfig fields
//! [control]    # ControlConfig fields
//! [backend]    # BackendConfig fields
//! ```
//!
//! Missing keys take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::ControlConfig;
use crate::diagnosis::BackendConfig;
use crate::experiment::Condition;
use crate::sim::DynamicsConfig;
use crate::stats::TTestKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    pub n_agents: usize,
    pub days: u32,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub condition: Option<Condition>,
    pub conditions: Option<Vec<Condition>>,
    pub output_dir: Option<PathBuf>,
    pub t_test: TTestKind,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            n_agents: 30,
            days: 200,
            seed: None,
            seeds: None,
            condition: None,
            conditions: None,
            output_dir: None,
            t_test: TTestKind::Student,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub run: RunSettings,
    pub dynamics: DynamicsConfig,
    pub control: ControlConfig,
    pub backend: BackendConfig,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path:?}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path:?}: {reason}")]
    Parse { path: PathBuf, reason: String },
}

impl FileConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.into(),
            source,
        })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let parsed = if is_json {
            Self::from_json(&text)
        } else {
            Self::from_toml(&text)
        };
        parsed.map_err(|reason| ConfigError::Parse {
            path: path.into(),
            reason,
        })
    }
}
