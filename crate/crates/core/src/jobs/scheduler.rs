//! Job lifecycle: submit, run on a bounded worker pool, record outputs.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use super::executors::{read_outputs, ExecContext, Executor};
use crate::runtime::schema::{validate_args, NormalizedArgs, SchemaError, ToolSpec};
use crate::store::{content_type_for, get_artifact, put_artifact, ArtifactRef, ObjectStore};

pub const INPUT_PREFIX: &str = "inputs/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobKind {
    Simulation,
    VideoTracking,
    ImageSegmentation,
    UncertaintyQuantification,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResourceClass {
    Cpu,
    /// Annotation only; desk mode runs everything on the CPU pool.
    GpuEmulated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum JobState {
    Submitted,
    Starting,
    Running,
    Succeeded,
    Failed,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Succeeded | JobState::Failed)
    }

    /// Allowed single-step transitions.
    pub fn can_move_to(self, next: JobState) -> bool {
        matches!(
            (self, next),
            (JobState::Submitted, JobState::Starting)
                | (JobState::Starting, JobState::Running)
                | (JobState::Running, JobState::Succeeded)
                | (JobState::Running, JobState::Failed)
        )
    }
}

#[derive(Debug, Clone)]
pub struct JobDefinition {
    pub kind: JobKind,
    pub executor: String,
    pub resource: ResourceClass,
    /// Argument schema; submit validates against it.
    pub schema: ToolSpec,
    /// Arguments naming files under `inputs/` in the object store that are
    /// staged into the job's inputs directory.
    pub input_args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateChange {
    pub state: JobState,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobOutput {
    pub name: String,
    pub artifact: ArtifactRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobRecord {
    pub id: String,
    pub kind: JobKind,
    pub args: NormalizedArgs,
    pub state: JobState,
    pub session: String,
    pub history: Vec<StateChange>,
    pub submitted_at: DateTime<Utc>,
    pub started_at: Option<DateTime<Utc>>,
    pub finished_at: Option<DateTime<Utc>>,
    pub outputs: Vec<JobOutput>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_log: Option<String>,
}

#[derive(Debug, Error)]
pub enum JobError {
    #[error("unknown job kind {0:?}")]
    UnknownKind(JobKind),
    #[error("invalid arguments: {0}")]
    Args(#[from] SchemaError),
    #[error("input {0:?} not found in the object store")]
    InputNotFound(String),
    #[error("job {0:?} not found")]
    NotFound(String),
    #[error("job {id} is {state:?}, not finished")]
    NotFinished { id: String, state: JobState },
    #[error("job {id} failed: {log}")]
    Failed { id: String, log: String },
    #[error("output {0:?} could not be read: {1}")]
    Output(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextOutput {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectedOutputs {
    pub job_id: String,
    /// CSV, text and JSON outputs inlined for the model to read.
    pub text: Vec<TextOutput>,
    /// Figures, archives and other binary outputs, as download links.
    pub artifacts: Vec<ArtifactRef>,
}

fn is_text(name: &str) -> bool {
    matches!(
        content_type_for(name),
        "text/csv" | "text/plain" | "application/json"
    )
}

struct Inner {
    definitions: HashMap<JobKind, JobDefinition>,
    executors: HashMap<String, Arc<dyn Executor>>,
    store: Arc<dyn ObjectStore>,
    jobs: RwLock<BTreeMap<String, JobRecord>>,
    slots: Arc<Semaphore>,
}

/// Cheap to clone; clones share the same job table.
#[derive(Clone)]
pub struct Scheduler {
    inner: Arc<Inner>,
}

impl Scheduler {
    pub fn new(store: Arc<dyn ObjectStore>, parallelism: usize) -> Self {
        Self {
            inner: Arc::new(Inner {
                definitions: HashMap::new(),
                executors: HashMap::new(),
                store,
                jobs: RwLock::new(BTreeMap::new()),
                slots: Arc::new(Semaphore::new(parallelism.max(1))),
            }),
        }
    }

    fn inner_mut(&mut self) -> &mut Inner {
        Arc::get_mut(&mut self.inner)
            .expect("definitions are registered before the scheduler is shared")
    }

    pub fn register_executor(&mut self, name: &str, executor: Arc<dyn Executor>) {
        self.inner_mut()
            .executors
            .insert(name.to_string(), executor);
    }

    /// Panics if the definition names an executor that was not registered.
    pub fn define(&mut self, definition: JobDefinition) {
        assert!(
            self.inner.executors.contains_key(&definition.executor),
            "job kind {:?} refers to unregistered executor {:?}",
            definition.kind,
            definition.executor
        );
        self.inner_mut()
            .definitions
            .insert(definition.kind, definition);
    }

    pub fn definition(&self, kind: JobKind) -> Option<&JobDefinition> {
        self.inner.definitions.get(&kind)
    }

    pub fn store(&self) -> &Arc<dyn ObjectStore> {
        &self.inner.store
    }

    pub fn submit_job(
        &self,
        kind: JobKind,
        raw: &BTreeMap<String, String>,
        session: &str,
    ) -> Result<String, JobError> {
        let def = self
            .inner
            .definitions
            .get(&kind)
            .ok_or(JobError::UnknownKind(kind))?;
        let args = validate_args(&def.schema, raw)?;
        let mut staged = Vec::new();
        for name in &def.input_args {
            if let Some(file) = args.text(name) {
                let key = format!("{INPUT_PREFIX}{file}");
                if file.contains('/') || !self.inner.store.exists(&key) {
                    return Err(JobError::InputNotFound(file.to_string()));
                }
                staged.push(file.to_string());
            }
        }
        let id = format!("job-{}", uuid::Uuid::new_v4().simple());
        let now = Utc::now();
        let record = JobRecord {
            id: id.clone(),
            kind,
            args: args.clone(),
            state: JobState::Submitted,
            session: session.to_string(),
            history: vec![StateChange {
                state: JobState::Submitted,
                at: now,
            }],
            submitted_at: now,
            started_at: None,
            finished_at: None,
            outputs: Vec::new(),
            failure_log: None,
        };
        self.inner
            .jobs
            .write()
            .expect("job table lock")
            .insert(id.clone(), record);
        tracing::info!(job = %id, ?kind, session, "submitted job");

        let this = self.clone();
        let job_id = id.clone();
        tokio::spawn(async move {
            let _slot = this
                .inner
                .slots
                .clone()
                .acquire_owned()
                .await
                .expect("job semaphore never closes");
            this.execute(&job_id, kind, args, staged).await;
        });
        Ok(id)
    }

    fn transition(&self, id: &str, next: JobState, update: impl FnOnce(&mut JobRecord)) {
        let mut jobs = self.inner.jobs.write().expect("job table lock");
        let Some(rec) = jobs.get_mut(id) else { return };
        assert!(
            rec.state.can_move_to(next),
            "illegal job transition {:?} -> {:?}",
            rec.state,
            next
        );
        let last = rec.history.last().map(|h| h.at).unwrap_or(rec.submitted_at);
        let at = Utc::now().max(last);
        rec.state = next;
        rec.history.push(StateChange { state: next, at });
        match next {
            JobState::Running => rec.started_at = Some(at),
            JobState::Succeeded | JobState::Failed => rec.finished_at = Some(at),
            _ => {}
        }
        update(rec);
    }

    async fn execute(&self, id: &str, kind: JobKind, args: NormalizedArgs, staged: Vec<String>) {
        self.transition(id, JobState::Starting, |_| {});
        let def = &self.inner.definitions[&kind];
        let executor = self.inner.executors[&def.executor].clone();
        let prepared = (|| -> Result<(tempfile::TempDir, ExecContext), String> {
            let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
            let ctx = ExecContext {
                inputs_dir: dir.path().join("inputs"),
                args_path: dir.path().join("args.json"),
                outputs_dir: dir.path().join("outputs"),
            };
            std::fs::create_dir_all(&ctx.inputs_dir).map_err(|e| e.to_string())?;
            std::fs::create_dir_all(&ctx.outputs_dir).map_err(|e| e.to_string())?;
            let plain: BTreeMap<&String, &crate::runtime::schema::ArgScalar> =
                args.0.iter().map(|(k, v)| (k, &v.value)).collect();
            std::fs::write(
                &ctx.args_path,
                serde_json::to_vec_pretty(&plain).map_err(|e| e.to_string())?,
            )
            .map_err(|e| e.to_string())?;
            for file in &staged {
                let bytes = self
                    .inner
                    .store
                    .get(&format!("{INPUT_PREFIX}{file}"))
                    .map_err(|e| format!("staging {file}: {e}"))?;
                std::fs::write(ctx.inputs_dir.join(file), bytes).map_err(|e| e.to_string())?;
            }
            Ok((dir, ctx))
        })();
        self.transition(id, JobState::Running, |_| {});
        let (dir, ctx) = match prepared {
            Ok(p) => p,
            Err(log) => return self.fail(id, log),
        };
        let ran = tokio::task::spawn_blocking(move || {
            let result = executor.run(&ctx);
            (result, ctx)
        })
        .await;
        let ctx = match ran {
            Ok((Ok(()), ctx)) => ctx,
            Ok((Err(e), _)) => return self.fail(id, e.to_string()),
            Err(e) => return self.fail(id, format!("executor panicked: {e}")),
        };
        let files = match read_outputs(&ctx.outputs_dir) {
            Ok(f) => f,
            Err(e) => return self.fail(id, e.to_string()),
        };
        drop(dir);
        if files.is_empty() {
            return self.fail(id, "executor produced no outputs".into());
        }
        let mut outputs = Vec::new();
        for (name, bytes) in files {
            match put_artifact(self.inner.store.as_ref(), &name, &bytes) {
                Ok(artifact) => outputs.push(JobOutput { name, artifact }),
                Err(e) => return self.fail(id, format!("storing {name}: {e}")),
            }
        }
        tracing::info!(job = %id, outputs = outputs.len(), "job succeeded");
        self.transition(id, JobState::Succeeded, |rec| rec.outputs = outputs);
    }

    fn fail(&self, id: &str, log: String) {
        tracing::warn!(job = %id, "job failed: {log}");
        self.transition(id, JobState::Failed, |rec| rec.failure_log = Some(log));
    }

    /// Snapshot of the record; never waits for the job.
    pub fn job_status(&self, id: &str) -> Result<JobRecord, JobError> {
        self.inner
            .jobs
            .read()
            .expect("job table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| JobError::NotFound(id.to_string()))
    }

    /// Jobs submitted by `session`, oldest first.
    pub fn list_jobs(&self, session: &str) -> Vec<JobRecord> {
        let mut jobs: Vec<JobRecord> = self
            .inner
            .jobs
            .read()
            .expect("job table lock")
            .values()
            .filter(|j| j.session == session)
            .cloned()
            .collect();
        jobs.sort_by(|a, b| a.submitted_at.cmp(&b.submitted_at).then(a.id.cmp(&b.id)));
        jobs
    }

    pub fn collect_outputs(&self, id: &str) -> Result<CollectedOutputs, JobError> {
        let rec = self.job_status(id)?;
        match rec.state {
            JobState::Succeeded => {}
            JobState::Failed => {
                return Err(JobError::Failed {
                    id: rec.id,
                    log: rec.failure_log.unwrap_or_default(),
                })
            }
            state => return Err(JobError::NotFinished { id: rec.id, state }),
        }
        let mut collected = CollectedOutputs {
            job_id: rec.id,
            text: Vec::new(),
            artifacts: Vec::new(),
        };
        for out in rec.outputs {
            if is_text(&out.name) {
                let (bytes, _) = get_artifact(self.inner.store.as_ref(), &out.artifact.id)
                    .map_err(|e| JobError::Output(out.name.clone(), e.to_string()))?;
                collected.text.push(TextOutput {
                    name: out.name,
                    text: String::from_utf8_lossy(&bytes).into_owned(),
                });
            } else {
                collected.artifacts.push(out.artifact);
            }
        }
        Ok(collected)
    }

    /// Polls until the job reaches a terminal state or `timeout` passes.
    pub async fn wait_for(
        &self,
        id: &str,
        timeout: std::time::Duration,
    ) -> Result<JobRecord, JobError> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let rec = self.job_status(id)?;
            if rec.state.is_terminal() || tokio::time::Instant::now() >= deadline {
                return Ok(rec);
            }
            tokio::time::sleep(std::time::Duration::from_millis(10)).await;
        }
    }
}
