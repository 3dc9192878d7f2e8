use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::case::EvalCase;
use crate::client::{ApiClient, ClientError};
use crate::outcome::{categorize, EvalOutcome, RefusalDetector};

pub const ADDENDUM_PROMPT: &str = "
In addition, please also mention:
1. The list of sub-agents utilized to solve this query.
2. The specific tools used by those sub-agents to answer the question.

Only name the sub-agents and the tools that were actually utilized
";

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub timeout: Duration,
    pub parallelism: usize,
    pub append_addendum: bool,
    pub refusal: RefusalDetector,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            timeout: Duration::from_secs(60),
            parallelism: 4,
            append_addendum: true,
            refusal: RefusalDetector::default(),
        }
    }
}

impl RunOptions {
    /// Ten minutes per case, for slow live deployments.
    pub fn long_running() -> Self {
        Self {
            timeout: Duration::from_secs(600),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteRun {
    /// In case order; missing entries were never sent.
    pub outcomes: Vec<EvalOutcome>,
    /// Set when the endpoint went away and the rest of the suite was skipped.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl SuiteRun {
    pub fn is_partial(&self) -> bool {
        self.aborted.is_some()
    }
}

pub fn with_addendum(prompt: &str) -> String {
    format!("{}\n{ADDENDUM_PROMPT}", prompt.trim_end())
}

pub async fn run_suite(client: &ApiClient, cases: &[EvalCase], opts: &RunOptions) -> SuiteRun {
    let permits = Arc::new(Semaphore::new(opts.parallelism.max(1)));
    let abort: Arc<Mutex<Option<String>>> = Arc::new(Mutex::new(None));
    let stop = Arc::new(AtomicBool::new(false));
    let mut set = JoinSet::new();
    for (i, case) in cases.iter().cloned().enumerate() {
        let (client, permits, abort, stop) =
            (client.clone(), permits.clone(), abort.clone(), stop.clone());
        let opts = opts.clone();
        set.spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore open");
            if stop.load(Ordering::SeqCst) {
                return None;
            }
            let message = if opts.append_addendum { with_addendum(&case.prompt) } else { case.prompt.clone() };
            let session = format!("eval-{}-{}", case.suite, case.id);
            let started = Instant::now();
            let result = client.chat(&session, &message, opts.timeout).await;
            if let Err(ClientError::Unreachable(e)) = &result {
                stop.store(true, Ordering::SeqCst);
                abort.lock().expect("abort lock").get_or_insert_with(|| e.clone());
                tracing::error!(case = %case.id, "endpoint unreachable, aborting suite");
                return None;
            }
            let outcome = categorize(&case, result, started.elapsed(), &opts.refusal);
            tracing::info!(case = %case.id, category = ?outcome.category, success = outcome.task_success, "case finished");
            Some((i, outcome))
        });
    }
    let mut done = Vec::new();
    while let Some(joined) = set.join_next().await {
        if let Some(pair) = joined.expect("case task panicked") {
            done.push(pair);
        }
    }
    done.sort_by_key(|(i, _)| *i);
    let aborted = abort.lock().expect("abort lock").take();
    SuiteRun {
        outcomes: done.into_iter().map(|(_, o)| o).collect(),
        aborted,
    }
}
