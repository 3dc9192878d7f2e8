//! Supervisor-routed execution graph.
//!
//! A turn in full-copilot mode alternates supervisor decisions with
//! sub-agent runs until the supervisor answers; direct-tool mode runs one
//! agent with no supervisor involvement.

mod checkpoint;
mod engine;
mod registry;
mod supervisor;

use serde::{Deserialize, Serialize};

use crate::message::Message;

pub use checkpoint::{CheckpointError, CheckpointStore, CheckpointToken};
pub use engine::{Engine, EngineConfig, FailureKind, TurnError, TurnResult};
pub use registry::{AgentHandle, AgentRegistry, RegistryError};
pub use supervisor::{handoff_tool_name, parse_decision, SupervisorSpec, HANDOFF_TOOL_PREFIX};

/// Name recorded as the origin of supervisor-authored messages.
pub const SUPERVISOR: &str = "supervisor";

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum RunMode {
    #[default]
    #[serde(rename = "full")]
    FullCopilot,
    #[serde(rename = "direct")]
    DirectTool {
        agent: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tool: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RoutingDecision {
    Handoff { target: String, rationale: String },
    RespondDirectly { rationale: String },
    Clarify { rationale: String },
}

impl RoutingDecision {
    pub fn target(&self) -> Option<&str> {
        match self {
            RoutingDecision::Handoff { target, .. } => Some(target),
            _ => None,
        }
    }
}

/// Runtime state of one session between turns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphState {
    pub session_id: String,
    pub transcript: Vec<Message>,
    pub active_agent: Option<String>,
    pub pending_handoff: Option<String>,
    pub mode: RunMode,
    /// Steps used by the most recent turn.
    pub step_count: usize,
}

impl GraphState {
    pub fn new(session_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            transcript: Vec::new(),
            active_agent: None,
            pending_handoff: None,
            mode: RunMode::FullCopilot,
            step_count: 0,
        }
    }

    /// User messages and final answers, without tool plumbing.
    pub fn conversation(&self) -> Vec<Message> {
        self.transcript
            .iter()
            .filter(|m| m.is_conversational())
            .cloned()
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn run_mode_wire_format() {
        assert_eq!(
            serde_json::to_string(&RunMode::FullCopilot).unwrap(),
            r#"{"mode":"full"}"#
        );
        let direct: RunMode =
            serde_json::from_str(r#"{"mode":"direct","agent":"researcher"}"#).unwrap();
        assert_eq!(
            direct,
            RunMode::DirectTool {
                agent: "researcher".into(),
                tool: None
            }
        );
        assert!(serde_json::from_str::<RunMode>(r#"{"mode":"sideways"}"#).is_err());
    }
}
