//! Tool adapters that expose the domain capabilities to agents.

use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;

use super::analysis::DataAnalyst;
use super::hypothesis::HypothesisGenerator;
use super::osti::OstiClient;
use crate::jobs::{self, JobKind, JobRecord, Scheduler, INPUT_PREFIX};
use crate::runtime::schema::{ArgField, ArgType, NormalizedArgs, ToolSpec};
use crate::runtime::tool::{RegisterError, Tool, ToolContext, ToolError, ToolOutput, ToolRegistry};

pub const OSTI_SEARCH: &str = "osti_search";
pub const ANALYZE_DATASET: &str = "analyze_dataset";
pub const HYPOTHESIS_GENERATOR: &str = "hypothesis_generator";
pub const JOB_STATUS: &str = "get_job_status";
pub const LIST_JOBS: &str = "list_jobs";
pub const COLLECT_OUTPUTS: &str = "collect_job_outputs";
pub const LIST_INPUTS: &str = "list_inputs";

fn text_arg<'a>(args: &'a NormalizedArgs, name: &str) -> Result<&'a str, ToolError> {
    args.text(name)
        .ok_or_else(|| ToolError::Failed(format!("missing argument {name}")))
}

pub struct OstiSearchTool(pub Arc<OstiClient>);

impl OstiSearchTool {
    pub fn spec(rows_cap: u32) -> ToolSpec {
        ToolSpec::new(
            OSTI_SEARCH,
            "Search the OSTI repository of scientific and technical publications. Returns title, authors, DOI and description for each matching record.",
        )
        .arg(ArgField::new("query", ArgType::String, "Keywords describing the topic"))
        .arg(
            ArgField::new("rows", ArgType::Integer, &format!("Maximum number of records to return (at most {rows_cap})"))
                .default_value("5"),
        )
    }
}

#[async_trait]
impl Tool for OstiSearchTool {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let query = text_arg(args, "query")?;
        let rows = args.number("rows").unwrap_or(5.0) as i64;
        let records = self
            .0
            .search(query, rows)
            .await
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        if records.is_empty() {
            return Ok(ToolOutput::text(format!(
                "No OSTI records found for {query:?}."
            )));
        }
        let mut out = format!("{} OSTI record(s) for {query:?}:\n", records.len());
        for (i, r) in records.iter().enumerate() {
            out.push_str(&format!("\n[{}] {}\n", i + 1, r.title));
            if !r.authors.is_empty() {
                out.push_str(&format!("Authors: {}\n", r.authors.join("; ")));
            }
            if let Some(doi) = &r.doi {
                out.push_str(&format!("DOI: {doi}\n"));
            }
            if let Some(d) = &r.description {
                let short: String = d.chars().take(400).collect();
                out.push_str(&format!("Description: {short}\n"));
            }
            out.push_str(&format!("Citation: {}\n", r.citation()));
        }
        Ok(ToolOutput::text(out))
    }
}

pub struct AnalyzeDatasetTool(pub Arc<DataAnalyst>);

impl AnalyzeDatasetTool {
    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            ANALYZE_DATASET,
            "Find the ingested dataset that best matches the request, generate an analysis script for it, run the script in the sandbox and return the narrative, printed results and figure links.",
        )
        .arg(ArgField::new("query", ArgType::String, "The analysis request, including dataset keywords"))
    }
}

#[async_trait]
impl Tool for AnalyzeDatasetTool {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let result = self
            .0
            .analyze_dataset(text_arg(args, "query")?)
            .await
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolOutput {
            text: result.render(),
            artifacts: result.figures.clone(),
        })
    }
}

pub struct HypothesisTool(pub Arc<HypothesisGenerator>);

impl HypothesisTool {
    pub fn spec() -> ToolSpec {
        ToolSpec::new(
            HYPOTHESIS_GENERATOR,
            "Generate a scientific hypothesis and research plan (objectives, theoretical framing, hypothesis) for a topic.",
        )
        .arg(ArgField::new("topic", ArgType::String, "Research topic or question"))
    }
}

#[async_trait]
impl Tool for HypothesisTool {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let outcome = self
            .0
            .generate(text_arg(args, "topic")?)
            .await
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolOutput::text(outcome.text))
    }
}

pub struct SubmitJobTool {
    pub scheduler: Scheduler,
    pub kind: JobKind,
}

#[async_trait]
impl Tool for SubmitJobTool {
    async fn call(
        &self,
        args: &NormalizedArgs,
        ctx: &ToolContext,
    ) -> Result<ToolOutput, ToolError> {
        // The registry validated against the same schema; hand the
        // normalized values back as text for the scheduler's own check.
        let raw: BTreeMap<String, String> = args
            .0
            .iter()
            .map(|(k, v)| (k.clone(), v.value.to_string()))
            .collect();
        let id = self
            .scheduler
            .submit_job(self.kind, &raw, &ctx.session_id)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        Ok(ToolOutput::text(format!(
            "Submitted {:?} job {id}. Use {JOB_STATUS} to follow it and {COLLECT_OUTPUTS} once it has SUCCEEDED.",
            self.kind
        )))
    }
}

fn job_line(j: &JobRecord) -> String {
    let mut line = format!(
        "{} {:?} {:?} submitted {}",
        j.id,
        j.kind,
        j.state,
        j.submitted_at.to_rfc3339()
    );
    if let Some(f) = j.finished_at {
        line.push_str(&format!(" finished {}", f.to_rfc3339()));
    }
    line
}

fn job_id_spec(name: &str, description: &str) -> ToolSpec {
    ToolSpec::new(name, description).arg(ArgField::new(
        "job_id",
        ArgType::String,
        "Job id returned at submission",
    ))
}

pub struct JobStatusTool(pub Scheduler);

#[async_trait]
impl Tool for JobStatusTool {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let rec = self
            .0
            .job_status(text_arg(args, "job_id")?)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let mut text = job_line(&rec);
        if let Some(log) = &rec.failure_log {
            text.push_str(&format!("\nFailure: {log}"));
        }
        Ok(ToolOutput::text(text))
    }
}

pub struct ListJobsTool(pub Scheduler);

#[async_trait]
impl Tool for ListJobsTool {
    async fn call(&self, _: &NormalizedArgs, ctx: &ToolContext) -> Result<ToolOutput, ToolError> {
        let jobs = self.0.list_jobs(&ctx.session_id);
        if jobs.is_empty() {
            return Ok(ToolOutput::text(
                "No jobs have been submitted in this session.",
            ));
        }
        Ok(ToolOutput::text(
            jobs.iter().map(job_line).collect::<Vec<_>>().join("\n"),
        ))
    }
}

pub struct CollectOutputsTool(pub Scheduler);

#[async_trait]
impl Tool for CollectOutputsTool {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let c = self
            .0
            .collect_outputs(text_arg(args, "job_id")?)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        let mut text = format!("Outputs of job {}:\n", c.job_id);
        for t in &c.text {
            text.push_str(&format!("\n--- {} ---\n{}\n", t.name, t.text.trim_end()));
        }
        if !c.artifacts.is_empty() {
            text.push_str("\nDownloads:\n");
            for a in &c.artifacts {
                text.push_str(&format!("- {}: {}\n", a.name, a.link()));
            }
        }
        Ok(ToolOutput {
            text,
            artifacts: c.artifacts,
        })
    }
}

pub struct ListInputsTool(pub Scheduler);

#[async_trait]
impl Tool for ListInputsTool {
    async fn call(&self, _: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        let objects = self
            .0
            .store()
            .list(INPUT_PREFIX)
            .map_err(|e| ToolError::Failed(e.to_string()))?;
        if objects.is_empty() {
            return Ok(ToolOutput::text("No input files are available."));
        }
        let lines: Vec<String> = objects
            .iter()
            .map(|o| {
                format!(
                    "{} ({} bytes)",
                    o.key.trim_start_matches(INPUT_PREFIX),
                    o.size
                )
            })
            .collect();
        Ok(ToolOutput::text(format!(
            "Available input files:\n{}",
            lines.join("\n")
        )))
    }
}

/// Registers the job tools for every kind the scheduler defines, plus
/// status, listing, collection and input listing.
pub fn register_job_tools(
    registry: &mut ToolRegistry,
    scheduler: &Scheduler,
) -> Result<(), RegisterError> {
    for kind in [
        JobKind::Simulation,
        JobKind::ImageSegmentation,
        JobKind::VideoTracking,
        JobKind::UncertaintyQuantification,
    ] {
        if let Some(def) = scheduler.definition(kind) {
            registry.register(
                def.schema.clone(),
                Arc::new(SubmitJobTool {
                    scheduler: scheduler.clone(),
                    kind,
                }),
            )?;
        }
    }
    registry.register(
        job_id_spec(
            JOB_STATUS,
            "Report the current state of a batch job without waiting for it.",
        ),
        Arc::new(JobStatusTool(scheduler.clone())),
    )?;
    registry.register(
        ToolSpec::new(
            LIST_JOBS,
            "List the batch jobs submitted in this session with their states.",
        ),
        Arc::new(ListJobsTool(scheduler.clone())),
    )?;
    registry.register(
        job_id_spec(
            COLLECT_OUTPUTS,
            "Fetch the results of a finished job: text outputs inline and download links for figures and videos.",
        ),
        Arc::new(CollectOutputsTool(scheduler.clone())),
    )?;
    registry.register(
        ToolSpec::new(
            LIST_INPUTS,
            "List the input files (images, videos, training data) available to batch jobs.",
        ),
        Arc::new(ListInputsTool(scheduler.clone())),
    )?;
    Ok(())
}

/// Tool names for each built-in job kind, as registered.
pub fn submit_tool_name(kind: JobKind) -> String {
    match kind {
        JobKind::Simulation => jobs::simulation_schema().name,
        JobKind::ImageSegmentation => jobs::segmentation_schema().name,
        JobKind::VideoTracking => jobs::tracking_schema().name,
        JobKind::UncertaintyQuantification => jobs::uq_schema().name,
    }
}
