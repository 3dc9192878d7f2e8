//! The single TOML configuration document: prompts, registry, backends,
//! policies and subsystem settings.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::GuardrailPolicy;
use crate::jobs::sim::SimConfig;
use crate::jobs::UqConfig;
use crate::orchestrator::{EngineConfig, SupervisorSpec};
use crate::runtime::react::AgentSpec;
use crate::safety::{FilterPolicy, SandboxConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    Scripted {
        id: String,
        /// TOML rules file, relative to the config file.
        rules: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        requests_per_second: Option<f64>,
    },
    /// Chat-completions compatible endpoint. Connection settings come from
    /// `{env_prefix}_BASE_URL`, `{env_prefix}_MODEL` and `{env_prefix}_API_KEY`.
    Remote {
        id: String,
        env_prefix: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        requests_per_second: Option<f64>,
    },
}

impl BackendConfig {
    pub fn id(&self) -> &str {
        match self {
            BackendConfig::Scripted { id, .. } | BackendConfig::Remote { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolModels {
    /// Backend that writes analysis scripts.
    pub analysis: String,
    /// Backend behind the hypothesis tool.
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    /// Filesystem object store root; in-memory when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_dir: Option<PathBuf>,
    /// Drop folder crawled for data packages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_dir: Option<PathBuf>,
    #[serde(default = "default_crawl")]
    pub crawl_interval_secs: f64,
    /// Files copied into the object store under `inputs/` at startup.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs_dir: Option<PathBuf>,
}

fn default_crawl() -> f64 {
    30.0
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            store_dir: None,
            drop_dir: None,
            crawl_interval_secs: default_crawl(),
            inputs_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OstiMode {
    Fixtures,
    Live,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OstiConfig {
    pub mode: OstiMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixtures_dir: Option<PathBuf>,
    #[serde(default = "default_osti_url")]
    pub base_url: String,
    #[serde(default = "default_rows_cap")]
    pub rows_cap: u32,
    #[serde(default = "default_osti_timeout")]
    pub timeout_secs: u64,
}

fn default_osti_url() -> String {
    crate::agents::osti::DEFAULT_BASE_URL.to_string()
}

fn default_rows_cap() -> u32 {
    crate::agents::osti::DEFAULT_ROWS_CAP
}

fn default_osti_timeout() -> u64 {
    30
}

impl Default for OstiConfig {
    fn default() -> Self {
        Self {
            mode: OstiMode::Live,
            fixtures_dir: None,
            base_url: default_osti_url(),
            rows_cap: default_rows_cap(),
            timeout_secs: default_osti_timeout(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobsConfig {
    #[serde(default = "default_job_parallelism")]
    pub parallelism: usize,
    #[serde(default)]
    pub simulation: SimConfig,
    #[serde(default)]
    pub uq: UqConfig,
}

fn default_job_parallelism() -> usize {
    4
}

impl Default for JobsConfig {
    fn default() -> Self {
        Self {
            parallelism: default_job_parallelism(),
            simulation: SimConfig::default(),
            uq: UqConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerConfig {
    #[serde(default = "default_bind")]
    pub bind: String,
    #[serde(default = "default_identity_header")]
    pub identity_header: String,
}

fn default_bind() -> String {
    "127.0.0.1:8080".into()
}

fn default_identity_header() -> String {
    "X-Auth-User".into()
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: default_bind(),
            identity_header: default_identity_header(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopilotConfig {
    #[serde(default)]
    pub engine: EngineConfig,
    pub supervisor: SupervisorSpec,
    pub agents: Vec<AgentSpec>,
    pub backends: Vec<BackendConfig>,
    pub tool_models: ToolModels,
    #[serde(default)]
    pub guardrail: GuardrailPolicy,
    #[serde(default)]
    pub filter: FilterPolicy,
    #[serde(default)]
    pub sandbox: SandboxConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub osti: OstiConfig,
    #[serde(default)]
    pub jobs: JobsConfig,
    #[serde(default)]
    pub server: ServerConfig,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config is inconsistent: {0}")]
    Invalid(String),
}

impl CopilotConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    /// Loads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for b in &mut self.backends {
            if let BackendConfig::Scripted { rules, .. } = b {
                fix(rules);
            }
        }
        for p in [
            &mut self.data.store_dir,
            &mut self.data.drop_dir,
            &mut self.data.inputs_dir,
            &mut self.osti.fixtures_dir,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    /// Cross-references that serde cannot check.
    pub fn check(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        let ids: Vec<&str> = self.backends.iter().map(BackendConfig::id).collect();
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return invalid(format!("backend {id:?} declared twice"));
            }
        }
        let known = |b: &str| ids.contains(&b);
        if !known(&self.supervisor.model) {
            return invalid(format!(
                "supervisor uses unknown backend {:?}",
                self.supervisor.model
            ));
        }
        for a in &self.agents {
            if !known(&a.model_binding) {
                return invalid(format!(
                    "agent {} uses unknown backend {:?}",
                    a.name, a.model_binding
                ));
            }
        }
        for b in [&self.tool_models.analysis, &self.tool_models.hypothesis] {
            if !known(b) {
                return invalid(format!("tool model uses unknown backend {b:?}"));
            }
        }
        if self.osti.mode == OstiMode::Fixtures && self.osti.fixtures_dir.is_none() {
            return invalid("osti fixtures mode needs fixtures_dir".into());
        }
        if self.engine.step_budget == 0 {
            return invalid("engine.step_budget must be at least 1".into());
        }
        self.filter
            .check()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.sandbox
            .limits
            .check()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }
}
