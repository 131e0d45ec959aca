//! Service and CLI configuration document (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{BackendConfig, GatewayError};
use crate::rules::{RulesConfig, RulesError};
use crate::session::SessionConfig;
use crate::tree::{TrainConfig, TreeError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    pub background_size: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        Self { background_size: 100, seed: 42 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionSettings {
    pub perturbations: usize,
    pub negatives_per_profile: usize,
    /// Fit the recipe tree on every stored profile rather than per session.
    pub global_recipe_tree: bool,
}

impl Default for SessionSettings {
    fn default() -> Self {
        let d = SessionConfig::default();
        Self {
            perturbations: d.perturbations,
            negatives_per_profile: d.negatives_per_profile,
            global_recipe_tree: d.global_recipe_tree,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppConfig {
    pub catalog_path: PathBuf,
    /// Built-in taxonomy when absent.
    #[serde(default)]
    pub taxonomy_path: Option<PathBuf>,
    #[serde(default)]
    pub rules: RulesConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub shap: ShapConfig,
    #[serde(default)]
    pub session: SessionSettings,
    #[serde(default)]
    pub backends: Vec<BackendConfig>,
    #[serde(default = "default_listen_addr")]
    pub listen_addr: String,
    /// Profiles and sessions are kept in memory only when absent.
    #[serde(default)]
    pub store_path: Option<PathBuf>,
    /// Static files served at `/`.
    #[serde(default)]
    pub console_dir: Option<PathBuf>,
    #[serde(default = "default_request_timeout_ms")]
    pub request_timeout_ms: u64,
}

fn default_listen_addr() -> String {
    "127.0.0.1:8080".into()
}

fn default_request_timeout_ms() -> u64 {
    60_000
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Rules(#[from] RulesError),
    #[error(transparent)]
    Train(#[from] TreeError),
    #[error(transparent)]
    Backend(#[from] GatewayError),
}

impl ConfigError {
    pub fn is_io(&self) -> bool {
        matches!(self, ConfigError::Io { .. })
    }
}

impl AppConfig {
    pub fn new(catalog_path: impl Into<PathBuf>) -> Self {
        Self {
            catalog_path: catalog_path.into(),
            taxonomy_path: None,
            rules: RulesConfig::default(),
            train: TrainConfig::default(),
            shap: ShapConfig::default(),
            session: SessionSettings::default(),
            backends: Vec::new(),
            listen_addr: default_listen_addr(),
            store_path: None,
            console_dir: None,
            request_timeout_ms: default_request_timeout_ms(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: AppConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load and validate; relative paths resolve against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut cfg = Self::from_toml(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_relative(dir);
        }
        Ok(cfg)
    }

    fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.catalog_path);
        for p in [&mut self.taxonomy_path, &mut self.store_path, &mut self.console_dir].into_iter().flatten() {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.rules.validate()?;
        self.train.validate()?;
        for b in &self.backends {
            b.validate()?;
        }
        if self.shap.background_size < 1 {
            return Err(ConfigError::Invalid("shap.background_size must be >= 1".into()));
        }
        if self.request_timeout_ms < 1 {
            return Err(ConfigError::Invalid("request_timeout_ms must be >= 1".into()));
        }
        Ok(())
    }

    pub fn session_config(&self) -> SessionConfig {
        SessionConfig {
            perturbations: self.session.perturbations,
            negatives_per_profile: self.session.negatives_per_profile,
            background_size: self.shap.background_size,
            seed: self.shap.seed,
            global_recipe_tree: self.session.global_recipe_tree,
            train: self.train,
        }
    }
}
