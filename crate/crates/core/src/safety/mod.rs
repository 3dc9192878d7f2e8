//! Script filtering and sandboxed execution for the analysis agent.

pub mod filter;
pub mod sandbox;

pub use filter::{tier2_filter, FilterOutcome, FilterPolicy, Rejection, SanitizedScript};
pub use sandbox::{
    ExecStatus, ExecutionOutcome, FailureCategory, InputFile, LimitsError, ResourceUsage, Sandbox,
    SandboxConfig, SandboxLimits, TableOutput,
};
