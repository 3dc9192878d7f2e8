//! Dataset analysis: metadata lookup, code generation, tier-2 filter,
//! sandboxed execution.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::data::plane::ReadError;
use crate::data::{DataPlane, StoredRecord};
use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::message::Message;
use crate::safety::{
    tier2_filter, ExecStatus, FailureCategory, FilterOutcome, FilterPolicy, InputFile, Rejection,
    Sandbox,
};
use crate::store::ArtifactRef;

pub const CODEGEN_CALLER: &str = "analysis_codegen";

pub const CODEGEN_PROMPT: &str = "You write short Python analysis scripts for catalysis datasets. \
Reply with a brief narrative of the analysis followed by one fenced ```python block. \
The script runs in a sandbox where numpy (np), pandas (pd), matplotlib.pyplot (plt) and seaborn (sns) \
are already available; no other library may be used. The dataset file is in the working directory. \
Save every figure as a PNG file in the working directory and print numeric results to standard output.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AnalysisStatus {
    Executed,
    /// The script failed the tier-2 filter and was never run.
    Rejected {
        reason: Rejection,
    },
    /// The script ran and failed; the narrative is still returned.
    ExecutionFailed {
        category: FailureCategory,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisResult {
    pub dataset_id: String,
    pub file: String,
    pub narrative: String,
    pub generated_script: String,
    pub figures: Vec<ArtifactRef>,
    pub stdout: String,
    pub tables: Vec<crate::safety::TableOutput>,
    pub status: AnalysisStatus,
}

impl AnalysisResult {
    /// Plain-text rendering for the agent. Links are emitted whole, one per
    /// line.
    pub fn render(&self) -> String {
        let mut out = format!(
            "Dataset: {} (file {})\n\n{}\n",
            self.dataset_id,
            self.file,
            self.narrative.trim()
        );
        match &self.status {
            AnalysisStatus::Executed => {}
            AnalysisStatus::Rejected { reason } => {
                out.push_str(&format!("\nThe generated script was blocked by the safety filter ({reason}) and was not run.\n"));
            }
            AnalysisStatus::ExecutionFailed { category, detail } => {
                out.push_str(&format!(
                    "\nThe script failed in the sandbox ({category:?}): {detail}\n"
                ));
            }
        }
        if !self.figures.is_empty() {
            out.push_str("\nFigures:\n");
            for f in &self.figures {
                out.push_str(&format!("- {}: {}\n", f.name, f.link()));
            }
        }
        if !self.stdout.trim().is_empty() {
            out.push_str(&format!("\nOutput:\n{}\n", self.stdout.trim_end()));
        }
        for t in &self.tables {
            out.push_str(&format!("\nTable {}:\n{}\n", t.name, t.text.trim_end()));
        }
        out.push_str(&format!(
            "\nScript:\n```python\n{}\n```\n",
            self.generated_script.trim_end()
        ));
        out
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no ingested dataset matches {0:?}")]
    NoMatch(String),
    #[error("dataset {0} has no payload files")]
    NoFiles(String),
    #[error(transparent)]
    Read(#[from] ReadError),
    #[error("code generation failed: {0}")]
    Model(#[from] GatewayError),
    #[error("query must not be empty")]
    EmptyQuery,
}

/// Splits a completion into narrative text and the first fenced code block.
pub fn split_completion(text: &str) -> (String, String) {
    let Some(start) = text.find("```") else {
        return (text.trim().to_string(), String::new());
    };
    let after = &text[start + 3..];
    let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
    let body = &after[body_start..];
    let (code, rest) = match body.find("```") {
        Some(end) => (&body[..end], &body[end + 3..]),
        None => (body, ""),
    };
    let narrative = format!("{}\n{}", text[..start].trim(), rest.trim());
    (narrative.trim().to_string(), code.trim_end().to_string())
}

fn pick_file(rec: &StoredRecord) -> Option<&str> {
    let by_ext = |ext: &str| {
        rec.files
            .iter()
            .find(|f| f.name.to_lowercase().ends_with(ext))
    };
    by_ext(".csv")
        .or_else(|| by_ext(".txt"))
        .or_else(|| rec.files.first())
        .map(|f| f.name.as_str())
}

fn preview(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes)
        .lines()
        .take(6)
        .collect::<Vec<_>>()
        .join("\n")
}

pub struct DataAnalyst {
    data: Arc<DataPlane>,
    gateway: Arc<Gateway>,
    backend: String,
    sandbox: Arc<Sandbox>,
    policy: FilterPolicy,
    per_dataset: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl DataAnalyst {
    pub fn new(
        data: Arc<DataPlane>,
        gateway: Arc<Gateway>,
        backend: &str,
        sandbox: Arc<Sandbox>,
        policy: FilterPolicy,
    ) -> Self {
        Self {
            data,
            gateway,
            backend: backend.to_string(),
            sandbox,
            policy,
            per_dataset: Mutex::new(HashMap::new()),
        }
    }

    pub fn sandbox(&self) -> &Arc<Sandbox> {
        &self.sandbox
    }

    pub async fn analyze_dataset(&self, query: &str) -> Result<AnalysisResult, AnalysisError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(AnalysisError::EmptyQuery);
        }
        let rec = self
            .data
            .find_dataset(query)
            .ok_or_else(|| AnalysisError::NoMatch(query.to_string()))?;
        let id = rec.metadata.id.clone();
        let file = pick_file(&rec)
            .ok_or_else(|| AnalysisError::NoFiles(id.clone()))?
            .to_string();
        let bytes = self.data.read_file(&id, &file)?;

        let title = rec.metadata.title.clone().unwrap_or_default();
        let task = format!(
            "Dataset file: {file}\nDataset title: {title}\nFirst lines:\n{}\n\nRequest: {query}",
            preview(&bytes)
        );
        let req = ModelRequest::new(
            CODEGEN_CALLER,
            &self.backend,
            vec![Message::system(CODEGEN_PROMPT), Message::user(task)],
        );
        let completion = self.gateway.complete(&req).await?;
        let (narrative, script) = split_completion(completion.text_or_empty());

        let mut result = AnalysisResult {
            dataset_id: id.clone(),
            file: file.clone(),
            narrative,
            generated_script: script.clone(),
            figures: Vec::new(),
            stdout: String::new(),
            tables: Vec::new(),
            status: AnalysisStatus::Executed,
        };
        let sanitized = match tier2_filter(&script, &self.policy) {
            FilterOutcome::Rejected(reason) => {
                tracing::warn!(dataset = %id, "generated script rejected: {reason}");
                result.status = AnalysisStatus::Rejected { reason };
                return Ok(result);
            }
            FilterOutcome::Sanitized(s) => s,
        };

        let lock = self
            .per_dataset
            .lock()
            .await
            .entry(id.clone())
            .or_default()
            .clone();
        let _serial = lock.lock().await;
        let outcome = self
            .sandbox
            .execute(&sanitized, &[InputFile { name: file, bytes }])
            .await;
        result.figures = outcome.figures;
        result.stdout = outcome.stdout;
        result.tables = outcome.tables;
        if let ExecStatus::Failed { category, detail } = outcome.status {
            result.status = AnalysisStatus::ExecutionFailed { category, detail };
        }
        Ok(result)
    }
}
