//! Isolated execution of sanitized analysis scripts.
//!
//! Each run gets a fresh directory holding the script and a scratch area.
//! The interpreter runs in its own process with rlimits, a private network
//! namespace when the kernel allows one, an unprivileged uid when started
//! as root, and an audit hook that confines file access to the scratch
//! area (plus read access to the interpreter's own library tree).

use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncReadExt};
use tokio::process::Command;
use tokio::sync::Semaphore;

use super::filter::SanitizedScript;
use crate::store::{put_artifact, ArtifactRef, ObjectStore};

const RUNNER: &str = include_str!("runner.py");
const ISOLATION_EXIT: i32 = 97;
const MEMORY_EXIT: i32 = 98;
const NOBODY: u32 = 65534;
const USAGE_MARKER: &str = "__sandbox_usage__";
const CACHE_DIR: &str = ".cache";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxLimits {
    pub wall_secs: f64,
    pub memory_mb: u64,
    /// Cap on captured stdout+stderr and on any single file written.
    pub output_kb: u64,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        Self {
            wall_secs: 60.0,
            memory_mb: 2048,
            output_kb: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandboxConfig {
    #[serde(default = "default_python")]
    pub python: String,
    #[serde(default)]
    pub limits: SandboxLimits,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    /// Switch to an unprivileged uid when running as root.
    #[serde(default = "yes")]
    pub drop_privileges: bool,
    /// Enter a fresh network namespace (no interfaces up).
    #[serde(default = "yes")]
    pub isolate_network: bool,
}

fn default_python() -> String {
    "python3".into()
}

fn default_parallelism() -> usize {
    4
}

fn yes() -> bool {
    true
}

impl Default for SandboxConfig {
    fn default() -> Self {
        Self {
            python: default_python(),
            limits: SandboxLimits::default(),
            parallelism: default_parallelism(),
            drop_privileges: true,
            isolate_network: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LimitsError {
    #[error("sandbox limit {0} must be positive")]
    NonPositive(&'static str),
}

impl SandboxLimits {
    pub fn check(&self) -> Result<(), LimitsError> {
        if !(self.wall_secs > 0.0) {
            return Err(LimitsError::NonPositive("wall_secs"));
        }
        if self.memory_mb == 0 {
            return Err(LimitsError::NonPositive("memory_mb"));
        }
        if self.output_kb == 0 {
            return Err(LimitsError::NonPositive("output_kb"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    Timeout,
    Memory,
    Output,
    Isolation,
    Runtime,
    /// The sandbox could not be set up (interpreter missing, scratch I/O).
    Setup,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExecStatus {
    Succeeded,
    Failed {
        category: FailureCategory,
        detail: String,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    pub wall_ms: u64,
    #[serde(default)]
    pub cpu_secs: f64,
    #[serde(default)]
    pub max_rss_kb: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableOutput {
    pub name: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: ExecStatus,
    pub stdout: String,
    pub stderr: String,
    /// CSV files the script wrote into its working directory.
    pub tables: Vec<TableOutput>,
    pub figures: Vec<ArtifactRef>,
    pub exit_code: Option<i32>,
    pub usage: ResourceUsage,
}

impl ExecutionOutcome {
    pub fn succeeded(&self) -> bool {
        self.status == ExecStatus::Succeeded
    }

    pub fn failure_category(&self) -> Option<FailureCategory> {
        match &self.status {
            ExecStatus::Failed { category, .. } => Some(*category),
            ExecStatus::Succeeded => None,
        }
    }

    fn setup_failure(detail: String) -> Self {
        Self {
            status: ExecStatus::Failed {
                category: FailureCategory::Setup,
                detail,
            },
            stdout: String::new(),
            stderr: String::new(),
            tables: Vec::new(),
            figures: Vec::new(),
            exit_code: None,
            usage: ResourceUsage::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

pub struct Sandbox {
    config: SandboxConfig,
    store: Arc<dyn ObjectStore>,
    slots: Arc<Semaphore>,
    invocations: std::sync::atomic::AtomicUsize,
}

async fn read_capped<R: AsyncRead + Unpin>(mut r: R, cap: usize) -> (Vec<u8>, bool) {
    let mut out = Vec::new();
    let mut buf = [0u8; 8192];
    let mut over = false;
    loop {
        match r.read(&mut buf).await {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                if out.len() + n > cap {
                    out.extend_from_slice(&buf[..cap.saturating_sub(out.len())]);
                    over = true;
                    break;
                }
                out.extend_from_slice(&buf[..n]);
            }
        }
    }
    (out, over)
}

fn valid_input_name(name: &str) -> bool {
    !name.is_empty()
        && name != "."
        && name != ".."
        && !name.starts_with('.')
        && !name.contains(['/', '\\', '\0'])
}

/// Files directly under or below `scratch` that are regular files (not
/// symlinks) and whose canonical path stays inside `scratch`.
fn collect_files(scratch: &Path, ext: &str) -> Vec<PathBuf> {
    let Ok(root) = scratch.canonicalize() else {
        return Vec::new();
    };
    let mut out = Vec::new();
    let mut stack = vec![root.clone()];
    while let Some(dir) = stack.pop() {
        let Ok(entries) = std::fs::read_dir(&dir) else {
            continue;
        };
        for e in entries.flatten() {
            let Ok(ft) = e.file_type() else { continue };
            let path = e.path();
            if ft.is_symlink() {
                continue;
            }
            if ft.is_dir() {
                if path.file_name().is_some_and(|n| n != CACHE_DIR) {
                    stack.push(path);
                }
                continue;
            }
            let matches = path
                .extension()
                .is_some_and(|x| x.eq_ignore_ascii_case(ext));
            if ft.is_file() && matches && path.canonicalize().is_ok_and(|c| c.starts_with(&root)) {
                out.push(path);
            }
        }
    }
    out.sort();
    out
}

fn chown_tree(path: &Path, uid: u32) -> std::io::Result<()> {
    std::os::unix::fs::lchown(path, Some(uid), Some(uid))?;
    if path.is_dir() && !path.is_symlink() {
        for e in std::fs::read_dir(path)? {
            chown_tree(&e?.path(), uid)?;
        }
    }
    Ok(())
}

impl Sandbox {
    pub fn new(config: SandboxConfig, store: Arc<dyn ObjectStore>) -> Result<Self, LimitsError> {
        config.limits.check()?;
        let slots = Arc::new(Semaphore::new(config.parallelism.max(1)));
        Ok(Self {
            config,
            store,
            slots,
            invocations: Default::default(),
        })
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.config
    }

    /// Where figures and tables are persisted.
    pub fn store(&self) -> &Arc<dyn ObjectStore> {
        &self.store
    }

    /// Number of scripts handed to `execute`/`execute_with` so far.
    pub fn invocations(&self) -> usize {
        self.invocations.load(std::sync::atomic::Ordering::SeqCst)
    }

    pub async fn execute(
        &self,
        script: &SanitizedScript,
        inputs: &[InputFile],
    ) -> ExecutionOutcome {
        self.execute_with(script, inputs, &self.config.limits).await
    }

    pub async fn execute_with(
        &self,
        script: &SanitizedScript,
        inputs: &[InputFile],
        limits: &SandboxLimits,
    ) -> ExecutionOutcome {
        self.invocations
            .fetch_add(1, std::sync::atomic::Ordering::SeqCst);
        if let Err(e) = limits.check() {
            return ExecutionOutcome::setup_failure(e.to_string());
        }
        let _slot = self
            .slots
            .acquire()
            .await
            .expect("sandbox semaphore never closes");
        match self.run(script, inputs, limits).await {
            Ok(outcome) => outcome,
            Err(e) => ExecutionOutcome::setup_failure(e.to_string()),
        }
    }

    async fn run(
        &self,
        script: &SanitizedScript,
        inputs: &[InputFile],
        limits: &SandboxLimits,
    ) -> std::io::Result<ExecutionOutcome> {
        use std::os::unix::fs::PermissionsExt;

        let run_dir = tempfile::Builder::new()
            .prefix("copilot-sandbox-")
            .tempdir()?;
        std::fs::set_permissions(run_dir.path(), std::fs::Permissions::from_mode(0o755))?;
        let script_path = run_dir.path().join("analysis.py");
        let runner_path = run_dir.path().join("runner.py");
        std::fs::write(&script_path, script.text())?;
        std::fs::write(&runner_path, RUNNER)?;
        for p in [&script_path, &runner_path] {
            std::fs::set_permissions(p, std::fs::Permissions::from_mode(0o644))?;
        }
        let scratch = run_dir.path().join("scratch");
        std::fs::create_dir(&scratch)?;
        std::fs::create_dir_all(scratch.join(CACHE_DIR).join("tmp"))?;
        let mut staged = Vec::new();
        for input in inputs {
            if !valid_input_name(&input.name) {
                return Err(std::io::Error::new(
                    std::io::ErrorKind::InvalidInput,
                    format!("invalid input file name {:?}", input.name),
                ));
            }
            std::fs::write(scratch.join(&input.name), &input.bytes)?;
            staged.push(input.name.clone());
        }

        // SAFETY: geteuid has no preconditions.
        let as_root = unsafe { libc::geteuid() } == 0;
        let drop_to = (self.config.drop_privileges && as_root).then_some(NOBODY);
        if let Some(uid) = drop_to {
            chown_tree(&scratch, uid)?;
        }

        let cache = scratch.join(CACHE_DIR);
        let mut cmd = Command::new(&self.config.python);
        cmd.arg("-I")
            .arg("-B")
            .arg(&runner_path)
            .arg(&script_path)
            .arg(&scratch)
            .arg(script.libraries().join(","))
            .current_dir(&scratch)
            .env_clear()
            .env("PATH", "/usr/bin:/bin")
            .env("HOME", &cache)
            .env("MPLCONFIGDIR", cache.join("mpl"))
            .env("TMPDIR", cache.join("tmp"))
            .env("MPLBACKEND", "Agg")
            .env("OPENBLAS_NUM_THREADS", "1")
            .env("OMP_NUM_THREADS", "1")
            .env("MKL_NUM_THREADS", "1")
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .kill_on_drop(true);

        let memory = limits.memory_mb.saturating_mul(1024 * 1024);
        let fsize = limits.output_kb.saturating_mul(1024);
        let isolate_network = self.config.isolate_network;
        // SAFETY: the closure runs in the forked child before exec and only
        // calls async-signal-safe libc functions.
        unsafe {
            cmd.pre_exec(move || {
                if isolate_network {
                    // EPERM without CAP_SYS_ADMIN; the audit hook still applies.
                    libc::unshare(libc::CLONE_NEWNET);
                }
                let set = |res, value: u64| {
                    let lim = libc::rlimit {
                        rlim_cur: value as libc::rlim_t,
                        rlim_max: value as libc::rlim_t,
                    };
                    libc::setrlimit(res, &lim)
                };
                if set(libc::RLIMIT_AS, memory) != 0
                    || set(libc::RLIMIT_FSIZE, fsize) != 0
                    || set(libc::RLIMIT_CORE, 0) != 0
                {
                    return Err(std::io::Error::last_os_error());
                }
                if let Some(uid) = drop_to {
                    if libc::setgroups(0, std::ptr::null()) != 0
                        || libc::setgid(uid as libc::gid_t) != 0
                        || libc::setuid(uid as libc::uid_t) != 0
                    {
                        return Err(std::io::Error::last_os_error());
                    }
                }
                Ok(())
            });
        }

        let started = Instant::now();
        let mut child = cmd.spawn()?;
        let cap = usize::try_from(fsize).unwrap_or(usize::MAX);
        let stdout = tokio::spawn(read_capped(child.stdout.take().expect("piped stdout"), cap));
        let stderr = tokio::spawn(read_capped(
            child.stderr.take().expect("piped stderr"),
            cap + 256,
        ));

        let wall = Duration::from_secs_f64(limits.wall_secs);
        let waited = tokio::time::timeout(wall, child.wait()).await;
        let timed_out = waited.is_err();
        let status = match waited {
            Ok(s) => Some(s?),
            Err(_) => {
                child.start_kill().ok();
                child.wait().await.ok()
            }
        };
        let wall_ms = started.elapsed().as_millis() as u64;
        let (out, out_over) = stdout.await.unwrap_or_default();
        let (err, _) = stderr.await.unwrap_or_default();

        let mut stderr_text = String::from_utf8_lossy(&err).into_owned();
        let mut usage = ResourceUsage {
            wall_ms,
            ..Default::default()
        };
        if let Some(pos) = stderr_text.rfind(USAGE_MARKER) {
            let mut fields = stderr_text[pos + USAGE_MARKER.len()..].split_whitespace();
            usage.max_rss_kb = fields.next().and_then(|v| v.parse().ok()).unwrap_or(0);
            usage.cpu_secs = fields.next().and_then(|v| v.parse().ok()).unwrap_or(0.0);
            stderr_text.truncate(pos);
            stderr_text.truncate(stderr_text.trim_end().len());
        }

        use std::os::unix::process::ExitStatusExt;
        let exit_code = status.and_then(|s| s.code());
        let signal = status.and_then(|s| s.signal());
        let failure = if timed_out {
            Some((
                FailureCategory::Timeout,
                format!("exceeded wall time of {}s", limits.wall_secs),
            ))
        } else if out_over {
            Some((
                FailureCategory::Output,
                format!("output exceeded {} KiB", limits.output_kb),
            ))
        } else if signal == Some(libc::SIGXFSZ) {
            Some((
                FailureCategory::Output,
                format!("file output exceeded {} KiB", limits.output_kb),
            ))
        } else if exit_code == Some(ISOLATION_EXIT) {
            let line = stderr_text
                .lines()
                .rev()
                .find(|l| l.contains("isolation"))
                .unwrap_or("");
            Some((FailureCategory::Isolation, line.to_string()))
        } else if exit_code == Some(MEMORY_EXIT)
            || signal == Some(libc::SIGKILL)
            || signal == Some(libc::SIGSEGV)
        {
            Some((
                FailureCategory::Memory,
                format!("exceeded memory cap of {} MiB", limits.memory_mb),
            ))
        } else if exit_code != Some(0) {
            let last = stderr_text
                .lines()
                .rev()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("");
            Some((FailureCategory::Runtime, last.to_string()))
        } else {
            None
        };

        let mut figures = Vec::new();
        let mut tables = Vec::new();
        if !timed_out {
            for path in collect_files(&scratch, "png") {
                let name = path
                    .strip_prefix(&scratch)
                    .unwrap_or(&path)
                    .to_string_lossy()
                    .into_owned();
                if let Ok(bytes) = std::fs::read(&path) {
                    match put_artifact(self.store.as_ref(), &name, &bytes) {
                        Ok(a) => figures.push(a),
                        Err(e) => tracing::warn!("could not store figure {name}: {e}"),
                    }
                }
            }
            for path in collect_files(&scratch, "csv") {
                let name = path
                    .strip_prefix(&scratch)
                    .unwrap_or(&path)
                    .to_string_lossy()
                    .into_owned();
                if staged.contains(&name) {
                    continue;
                }
                if let Ok(bytes) = std::fs::read(&path) {
                    tables.push(TableOutput {
                        name,
                        text: String::from_utf8_lossy(&bytes).into_owned(),
                    });
                }
            }
        }

        let status = match failure {
            None => ExecStatus::Succeeded,
            Some((category, detail)) => ExecStatus::Failed { category, detail },
        };
        Ok(ExecutionOutcome {
            status,
            stdout: String::from_utf8_lossy(&out).into_owned(),
            stderr: stderr_text,
            tables,
            figures,
            exit_code,
            usage,
        })
    }
}
