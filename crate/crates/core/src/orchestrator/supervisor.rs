use serde::{Deserialize, Serialize};

use super::registry::AgentRegistry;
use super::{GraphState, RoutingDecision};
use crate::gateway::{Gateway, GatewayError, ModelRequest, ModelResponse};
use crate::message::Message;
use crate::runtime::schema::ToolSpec;

pub const HANDOFF_TOOL_PREFIX: &str = "transfer_to_";

const HANDOFF_TEXT: &str = "HANDOFF:";
const CLARIFY_TEXT: &str = "CLARIFY:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorSpec {
    pub prompt: String,
    /// Gateway backend id.
    pub model: String,
}

pub fn handoff_tool_name(agent: &str) -> String {
    format!("{HANDOFF_TOOL_PREFIX}{agent}")
}

impl SupervisorSpec {
    /// The supervisor prompt followed by the roster of sub-agents.
    pub fn system_prompt(&self, registry: &AgentRegistry) -> String {
        let mut out = self.prompt.trim_end().to_string();
        out.push_str("\n\nAvailable sub-agents:\n");
        for a in registry.agents() {
            out.push_str(&format!(
                "- {} ({}): {}\n",
                a.name,
                a.display(),
                a.description
            ));
        }
        out
    }

    pub fn handoff_tools(&self, registry: &AgentRegistry) -> Vec<ToolSpec> {
        registry
            .agents()
            .iter()
            .map(|a| {
                ToolSpec::new(
                    &handoff_tool_name(&a.name),
                    &format!(
                        "Hand the current task to the {} agent. {}",
                        a.display(),
                        a.description
                    ),
                )
            })
            .collect()
    }

    pub fn request(&self, state: &GraphState, registry: &AgentRegistry) -> ModelRequest {
        let mut messages = vec![Message::system(self.system_prompt(registry))];
        messages.extend(state.conversation());
        ModelRequest::new(super::SUPERVISOR, &self.model, messages)
            .with_tools(self.handoff_tools(registry))
    }

    /// One model completion over the supervisor prompt and transcript.
    pub async fn decide(
        &self,
        state: &GraphState,
        registry: &AgentRegistry,
        gateway: &Gateway,
    ) -> Result<RoutingDecision, GatewayError> {
        let response = gateway.complete(&self.request(state, registry)).await?;
        Ok(parse_decision(&response, registry))
    }
}

/// Maps a supervisor completion onto a routing decision.
///
/// A `transfer_to_<agent>` tool call or a leading `HANDOFF: <agent>` line
/// hands off when the agent is registered. `CLARIFY: <question>` asks the
/// user. Anything else, including handoffs to unknown agents, is answered
/// directly with the completion text.
pub fn parse_decision(response: &ModelResponse, registry: &AgentRegistry) -> RoutingDecision {
    let text = response.text_or_empty().trim();
    if let Some(call) = response.tool_calls.first() {
        if let Some(target) = call.tool.strip_prefix(HANDOFF_TOOL_PREFIX) {
            if registry.contains(target) {
                return RoutingDecision::Handoff {
                    target: target.to_string(),
                    rationale: text.to_string(),
                };
            }
        }
    }
    if let Some(rest) = text.strip_prefix(HANDOFF_TEXT) {
        let rest = rest.trim_start();
        let target: String = rest
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_' || *c == '-')
            .collect();
        if registry.contains(&target) {
            let rationale = rest[target.len()..].trim().to_string();
            return RoutingDecision::Handoff { target, rationale };
        }
    }
    if let Some(rest) = text.strip_prefix(CLARIFY_TEXT) {
        return RoutingDecision::Clarify {
            rationale: rest.trim().to_string(),
        };
    }
    RoutingDecision::RespondDirectly {
        rationale: text.to_string(),
    }
}
