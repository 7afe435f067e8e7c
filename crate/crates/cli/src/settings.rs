//! Settings file and command-line overrides.
//!
//! Lookup order for the file: `--settings`, then `FOAMFORGE_SETTINGS`, then
//! `./foamforge.toml` when it exists. Every field is optional; flags win.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use foamforge_core::llm::HttpSettings;
use foamforge_core::{Config, RetrievalMode, VisualizationBackend};
use serde::Deserialize;

use crate::UsageError;

pub const DEFAULT_SETTINGS_FILE: &str = "foamforge.toml";
pub const DEFAULT_WORKDIR: &str = "runs";

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SettingsFile {
    pub workflow: Config,
    pub llm: HttpSettings,
    pub paths: PathSettings,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathSettings {
    pub workdir: Option<PathBuf>,
    pub index: Option<PathBuf>,
    /// Directory of prompt template overrides.
    pub prompts: Option<PathBuf>,
}

/// One flag per workflow configuration field.
#[derive(Debug, Default, Clone, Args)]
pub struct ConfigArgs {
    /// Review-and-correct rounds before giving up [default: 10].
    #[arg(long, global = true, value_name = "N")]
    pub max_loops: Option<u32>,
    /// Repair failed runs with the reviewer [default: true].
    #[arg(long, global = true, value_name = "BOOL")]
    pub reviewer_enabled: Option<bool>,
    /// Order file generation by declared dependencies [default: true].
    #[arg(long, global = true, value_name = "BOOL")]
    pub file_dependency_enabled: Option<bool>,
    /// Sampling temperature, 0 to 1 [default: 0].
    #[arg(long, global = true, value_name = "T")]
    pub temperature: Option<f64>,
    /// hierarchy or single_index [default: hierarchy].
    #[arg(long, global = true, value_name = "MODE", value_parser = parse_retrieval_mode)]
    pub retrieval_mode: Option<RetrievalMode>,
    /// Reference entries retrieved per query [default: 5].
    #[arg(long, global = true, value_name = "K")]
    pub top_k: Option<usize>,
    /// Embedding width [default: 1536].
    #[arg(long, global = true, value_name = "DIM")]
    pub embedding_dim: Option<usize>,
    /// Minimum cosine for a reference to be used [default: 0.2].
    #[arg(long, global = true, value_name = "COSINE")]
    pub relevance_threshold: Option<f32>,
    /// pyvista or paraview [default: pyvista].
    #[arg(long, global = true, value_name = "BACKEND", value_parser = parse_backend)]
    pub visualization_backend: Option<VisualizationBackend>,
    /// Tries for a plotting script [default: 3].
    #[arg(long, global = true, value_name = "N")]
    pub visualization_max_attempts: Option<u32>,
    /// Wall-clock limit for one Allrun [default: 600].
    #[arg(long, global = true, value_name = "SECS")]
    pub exec_timeout_secs: Option<u64>,
}

fn parse_retrieval_mode(s: &str) -> Result<RetrievalMode, String> {
    s.parse().map_err(|e: foamforge_core::ConfigError| e.to_string())
}

fn parse_backend(s: &str) -> Result<VisualizationBackend, String> {
    match s {
        "pyvista" => Ok(VisualizationBackend::Pyvista),
        "paraview" => Ok(VisualizationBackend::Paraview),
        other => Err(format!("unknown visualization backend '{other}' (pyvista or paraview)")),
    }
}

impl ConfigArgs {
    pub fn apply(&self, mut c: Config) -> Config {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field { c.$field = v; })*
            };
        }
        set!(
            max_loops,
            reviewer_enabled,
            file_dependency_enabled,
            temperature,
            retrieval_mode,
            top_k,
            embedding_dim,
            relevance_threshold,
            visualization_backend,
            visualization_max_attempts,
            exec_timeout_secs
        );
        c
    }
}

/// Path flags shared by the subcommands that touch cases or indices.
#[derive(Debug, Default, Clone, Args)]
pub struct PathArgs {
    /// Settings file (TOML with [workflow], [llm] and [paths] tables).
    #[arg(long, global = true, env = "FOAMFORGE_SETTINGS", value_name = "FILE")]
    pub settings: Option<PathBuf>,
    /// Directory that holds one sub-directory per case.
    #[arg(long, global = true, env = "FOAMFORGE_WORKDIR", value_name = "DIR")]
    pub workdir: Option<PathBuf>,
    /// Directory written by `foamforge index build`.
    #[arg(long, global = true, env = "FOAMFORGE_INDEX", value_name = "DIR")]
    pub index: Option<PathBuf>,
    /// Directory of prompt template overrides.
    #[arg(long, global = true, value_name = "DIR")]
    pub prompts: Option<PathBuf>,
}

/// Everything resolved from the settings file and the flags.
#[derive(Debug)]
pub struct Resolved {
    pub config: Config,
    pub llm: HttpSettings,
    pub workdir: PathBuf,
    pub index: Option<PathBuf>,
    pub prompts: Option<PathBuf>,
}

pub fn load_file(explicit: Option<&Path>) -> anyhow::Result<SettingsFile> {
    let path = match explicit {
        Some(p) => p.to_path_buf(),
        None => {
            let p = PathBuf::from(DEFAULT_SETTINGS_FILE);
            if !p.is_file() {
                return Ok(SettingsFile::default());
            }
            p
        }
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| UsageError(format!("cannot read settings file {}: {e}", path.display())))?;
    let file: SettingsFile =
        toml::from_str(&text).map_err(|e| UsageError(format!("malformed settings file {}: {e}", path.display())))?;
    Ok(file)
}

pub fn resolve(paths: &PathArgs, flags: &ConfigArgs) -> anyhow::Result<Resolved> {
    let file = load_file(paths.settings.as_deref())?;
    let config = flags.apply(file.workflow);
    config.validate().context("configuration")?;
    Ok(Resolved {
        config,
        llm: file.llm,
        workdir: paths.workdir.clone().or(file.paths.workdir).unwrap_or_else(|| PathBuf::from(DEFAULT_WORKDIR)),
        index: paths.index.clone().or(file.paths.index),
        prompts: paths.prompts.clone().or(file.paths.prompts),
    })
}
