//! Domain capabilities: literature search, dataset analysis, hypothesis
//! generation, and the tool adapters that expose them and the batch jobs.

pub mod analysis;
pub mod hypothesis;
pub mod osti;
pub mod tools;

pub use analysis::{AnalysisError, AnalysisResult, AnalysisStatus, DataAnalyst};
pub use hypothesis::{
    parse_plan, HypothesisError, HypothesisGenerator, HypothesisOutcome, PlanSource, ResearchPlan,
};
pub use osti::{
    parse_records, FixtureSource, LiveSource, OstiClient, OstiError, PublicationRecord,
    RecordSource,
};
