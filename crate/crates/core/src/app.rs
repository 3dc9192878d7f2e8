//! Assembles a running copilot from a [`CopilotConfig`].

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use thiserror::Error;

use crate::agents::osti::{FixtureSource, LiveSource, OstiClient, RecordSource};
use crate::agents::tools::{self, AnalyzeDatasetTool, HypothesisTool, OstiSearchTool};
use crate::agents::{DataAnalyst, HypothesisGenerator};
use crate::config::{BackendConfig, ConfigError, CopilotConfig, OstiMode};
use crate::data::{Crawler, DataPlane, MemoryKv};
use crate::gateway::{
    Gateway, Guardrail, ModelBackend, OpenAiCompatBackend, RemoteConfig, ScriptedBackend,
};
use crate::jobs::{standard_scheduler, Scheduler, INPUT_PREFIX};
use crate::orchestrator::{AgentRegistry, Engine};
use crate::runtime::{AgentRuntime, ToolRegistry};
use crate::safety::Sandbox;
use crate::store::{FsObjectStore, MemoryObjectStore, ObjectStore};

/// Directory holding the bundled desk configuration and fixtures.
pub fn assets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("assets")
}

#[derive(Debug, Error)]
pub enum AppError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("backend {id}: {message}")]
    Backend { id: String, message: String },
    #[error("guardrail policy: {0}")]
    Guardrail(String),
    #[error("object store: {0}")]
    Store(String),
    #[error("sandbox: {0}")]
    Sandbox(String),
    #[error("osti: {0}")]
    Osti(String),
    #[error("tool registration: {0}")]
    Tools(String),
    #[error("agent registration: {0}")]
    Agents(String),
    #[error("reading {path}: {message}")]
    Io { path: PathBuf, message: String },
}

pub struct App {
    pub config: CopilotConfig,
    pub store: Arc<dyn ObjectStore>,
    pub data: Arc<DataPlane>,
    pub crawler: Option<Arc<Crawler>>,
    pub scheduler: Scheduler,
    pub sandbox: Arc<Sandbox>,
    pub gateway: Arc<Gateway>,
    pub engine: Arc<Engine>,
}

impl App {
    /// The bundled desk: scripted backends, fixture literature, a seeded
    /// drop folder and job inputs. Everything runs offline.
    pub fn desk() -> Result<Self, AppError> {
        Self::from_file(assets_dir().join("config.toml"))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, AppError> {
        Self::build(CopilotConfig::load(path)?)
    }

    /// Builds every component. Paths in `config` must already be resolved.
    /// The drop folder is crawled once and indexed before returning.
    pub fn build(config: CopilotConfig) -> Result<Self, AppError> {
        config.check()?;
        let store: Arc<dyn ObjectStore> = match &config.data.store_dir {
            Some(dir) => {
                Arc::new(FsObjectStore::open(dir).map_err(|e| AppError::Store(e.to_string()))?)
            }
            None => Arc::new(MemoryObjectStore::new()),
        };
        let data = Arc::new(DataPlane::new(store.clone(), Arc::new(MemoryKv::default())));
        let crawler = config
            .data
            .drop_dir
            .as_ref()
            .map(|d| Arc::new(Crawler::new(d, data.clone())));
        if let Some(c) = &crawler {
            let ingested = c.tick();
            tracing::info!(count = ingested.len(), "initial crawl");
        }
        data.process_index_events();
        if let Some(dir) = &config.data.inputs_dir {
            seed_inputs(store.as_ref(), dir)?;
        }

        let scheduler = standard_scheduler(
            store.clone(),
            config.jobs.parallelism,
            config.jobs.simulation.clone(),
            config.jobs.uq.clone(),
        );
        let sandbox = Arc::new(
            Sandbox::new(config.sandbox.clone(), store.clone())
                .map_err(|e| AppError::Sandbox(e.to_string()))?,
        );

        let guardrail = Guardrail::new(config.guardrail.clone())
            .map_err(|e| AppError::Guardrail(e.to_string()))?;
        let mut gateway = Gateway::new(guardrail);
        for b in &config.backends {
            let (backend, rps) = make_backend(b)?;
            gateway.add_backend(b.id(), backend, rps);
        }
        let gateway = Arc::new(gateway);

        let source: Box<dyn RecordSource> = match config.osti.mode {
            OstiMode::Fixtures => {
                let dir = config
                    .osti
                    .fixtures_dir
                    .as_ref()
                    .expect("checked by config");
                Box::new(FixtureSource::open(dir).map_err(|e| AppError::Osti(e.to_string()))?)
            }
            OstiMode::Live => Box::new(
                LiveSource::new(
                    &config.osti.base_url,
                    Duration::from_secs(config.osti.timeout_secs),
                )
                .map_err(|e| AppError::Osti(e.to_string()))?,
            ),
        };
        let osti = Arc::new(OstiClient::new(source, config.osti.rows_cap));
        let analyst = Arc::new(DataAnalyst::new(
            data.clone(),
            gateway.clone(),
            &config.tool_models.analysis,
            sandbox.clone(),
            config.filter.clone(),
        ));
        let hypothesis = Arc::new(HypothesisGenerator::new(
            gateway.clone(),
            &config.tool_models.hypothesis,
        ));

        let mut tool_registry = ToolRegistry::new();
        let tool_err = |e: crate::runtime::tool::RegisterError| AppError::Tools(e.to_string());
        tool_registry
            .register(
                OstiSearchTool::spec(config.osti.rows_cap),
                Arc::new(OstiSearchTool(osti)),
            )
            .map_err(tool_err)?;
        tool_registry
            .register(
                AnalyzeDatasetTool::spec(),
                Arc::new(AnalyzeDatasetTool(analyst)),
            )
            .map_err(tool_err)?;
        tool_registry
            .register(HypothesisTool::spec(), Arc::new(HypothesisTool(hypothesis)))
            .map_err(tool_err)?;
        tools::register_job_tools(&mut tool_registry, &scheduler).map_err(tool_err)?;

        let mut agents = AgentRegistry::new();
        for spec in &config.agents {
            agents
                .register_agent(spec.clone(), &tool_registry)
                .map_err(|e| AppError::Agents(e.to_string()))?;
        }
        let runtime = AgentRuntime::new(gateway.clone(), Arc::new(tool_registry));
        let engine = Arc::new(Engine::new(
            agents,
            config.supervisor.clone(),
            runtime,
            config.engine.clone(),
        ));

        Ok(Self {
            config,
            store,
            data,
            crawler,
            scheduler,
            sandbox,
            gateway,
            engine,
        })
    }

    /// Starts the periodic crawler and the index worker. Needs a runtime.
    pub fn spawn_background(&self) -> Vec<tokio::task::JoinHandle<()>> {
        let mut handles = vec![self.data.spawn_indexer()];
        if let Some(c) = &self.crawler {
            let secs = self.config.data.crawl_interval_secs.max(0.1);
            handles.push(c.spawn(Duration::from_secs_f64(secs)));
        }
        handles
    }
}

fn make_backend(b: &BackendConfig) -> Result<(Arc<dyn ModelBackend>, Option<f64>), AppError> {
    match b {
        BackendConfig::Scripted {
            id,
            rules,
            requests_per_second,
        } => {
            let doc = std::fs::read_to_string(rules).map_err(|e| AppError::Io {
                path: rules.clone(),
                message: e.to_string(),
            })?;
            let backend = ScriptedBackend::from_toml(&doc).map_err(|e| AppError::Backend {
                id: id.clone(),
                message: e.to_string(),
            })?;
            Ok((Arc::new(backend), *requests_per_second))
        }
        BackendConfig::Remote {
            id,
            env_prefix,
            requests_per_second,
        } => {
            let cfg = RemoteConfig::from_env(env_prefix).ok_or_else(|| AppError::Backend {
                id: id.clone(),
                message: format!("set {env_prefix}_BASE_URL and {env_prefix}_MODEL"),
            })?;
            let backend = OpenAiCompatBackend::new(cfg).map_err(|e| AppError::Backend {
                id: id.clone(),
                message: e.to_string(),
            })?;
            Ok((Arc::new(backend), *requests_per_second))
        }
    }
}

/// Copies the regular files of `dir` into the store under `inputs/`.
pub fn seed_inputs(store: &dyn ObjectStore, dir: &Path) -> Result<usize, AppError> {
    let io = |e: std::io::Error| AppError::Io {
        path: dir.to_path_buf(),
        message: e.to_string(),
    };
    let mut n = 0;
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(io)?
        .collect::<Result<_, _>>()
        .map_err(io)?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        if !entry.file_type().map_err(io)?.is_file() {
            continue;
        }
        let Some(name) = entry.file_name().to_str().map(str::to_string) else {
            continue;
        };
        let bytes = std::fs::read(entry.path()).map_err(io)?;
        store
            .put(&format!("{INPUT_PREFIX}{name}"), &bytes)
            .map_err(|e| AppError::Store(e.to_string()))?;
        n += 1;
    }
    Ok(n)
}
