use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read settings file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed settings file {path}: {message}")]
    Parse { path: String, message: String },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RetrievalMode {
    #[default]
    Hierarchy,
    SingleIndex,
}

impl std::fmt::Display for RetrievalMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RetrievalMode::Hierarchy => "hierarchy",
            RetrievalMode::SingleIndex => "single_index",
        })
    }
}

impl std::str::FromStr for RetrievalMode {
    type Err = ConfigError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hierarchy" => Ok(RetrievalMode::Hierarchy),
            "single_index" | "single-index" | "baseline" => Ok(RetrievalMode::SingleIndex),
            other => Err(ConfigError::Invalid(format!("unknown retrieval mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisualizationBackend {
    #[default]
    Pyvista,
    Paraview,
}

impl VisualizationBackend {
    pub fn library_name(self) -> &'static str {
        match self {
            VisualizationBackend::Pyvista => "pyvista",
            VisualizationBackend::Paraview => "paraview.simple",
        }
    }
}

/// Workflow configuration. Defaults are the best-performing ablation setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub max_loops: u32,
    pub reviewer_enabled: bool,
    pub file_dependency_enabled: bool,
    pub temperature: f64,
    pub retrieval_mode: RetrievalMode,
    pub top_k: usize,
    pub embedding_dim: usize,
    /// Matches scoring below this cosine are dropped after top-k.
    pub relevance_threshold: f32,
    pub visualization_backend: VisualizationBackend,
    pub visualization_max_attempts: u32,
    pub exec_timeout_secs: u64,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            max_loops: 10,
            reviewer_enabled: true,
            file_dependency_enabled: true,
            temperature: 0.0,
            retrieval_mode: RetrievalMode::Hierarchy,
            top_k: 5,
            embedding_dim: 1536,
            relevance_threshold: 0.2,
            visualization_backend: VisualizationBackend::Pyvista,
            visualization_max_attempts: 3,
            exec_timeout_secs: 600,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.max_loops == 0 {
            return Err(ConfigError::Invalid("max_loops must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.temperature) {
            return Err(ConfigError::Invalid(format!("temperature {} outside [0, 1]", self.temperature)));
        }
        if self.top_k == 0 {
            return Err(ConfigError::Invalid("top_k must be positive".into()));
        }
        if self.embedding_dim == 0 {
            return Err(ConfigError::Invalid("embedding_dim must be positive".into()));
        }
        if self.visualization_max_attempts == 0 {
            return Err(ConfigError::Invalid("visualization_max_attempts must be positive".into()));
        }
        if !(-1.0..=1.0).contains(&self.relevance_threshold) {
            return Err(ConfigError::Invalid("relevance_threshold must be a cosine value".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let cfg = Self::from_toml(&text)
            .map_err(|e| ConfigError::Parse { path: path.display().to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }
}
