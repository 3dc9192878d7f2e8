//! Stateless ReAct agents and the tools they call.

pub mod react;
pub mod schema;
pub mod tool;

pub use react::{AgentRuntime, AgentSpec, RuntimeError};
pub use schema::{validate_args, ArgField, ArgType, NormalizedArgs, SchemaError, ToolSpec};
pub use tool::{Tool, ToolContext, ToolError, ToolOutput, ToolRegistry};
