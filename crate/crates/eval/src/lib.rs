//! Routing evaluation and benchmark accounting against a running copilot API.

pub mod bench;
pub mod case;
pub mod client;
pub mod generate;
pub mod outcome;
pub mod report;
pub mod runner;

pub use bench::{run_benchmark, synthetic_benchmark, BenchmarkQuestion, BenchmarkReport};
pub use case::{
    ambiguous_suite, check_targets, load_cases, parse_cases, save_cases, unambiguous_suite,
    EvalCase,
};
pub use client::{ApiClient, ClientError};
pub use generate::{generate_case_suite, test_gen_prompt};
pub use outcome::{categorize, EvalOutcome, FailureCategory, RefusalDetector};
pub use report::{display_name, score_outcomes, AgentRow, EvalReport};
pub use runner::{run_suite, RunOptions, SuiteRun, ADDENDUM_PROMPT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model backend: {0}")]
    Backend(#[from] copilot_core::gateway::GatewayError),
}
