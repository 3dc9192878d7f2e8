//! The ReAct loop: model step, tool steps, repeat until a plain answer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::tool::{ToolContext, ToolRegistry};
use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::message::Message;
use crate::trace::{BudgetExhausted, StepBudget, TraceEvent, TraceRecorder};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub name: String,
    #[serde(alias = "prompt")]
    pub system_prompt: String,
    #[serde(default, alias = "tools")]
    pub tool_names: Vec<String>,
    /// Id of the gateway backend this agent talks to.
    #[serde(alias = "model")]
    pub model_binding: String,
    /// One-line capability summary shown to the supervisor.
    #[serde(default)]
    pub description: String,
    /// Human-facing name used in reports (e.g. "Literature Review").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl AgentSpec {
    pub fn display(&self) -> &str {
        self.display_name.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum RuntimeError {
    #[error(transparent)]
    Budget(#[from] BudgetExhausted),
    #[error("model step failed: {0}")]
    Model(#[from] GatewayError),
    #[error("agent {agent:?} cannot use tool {tool:?}")]
    ToolNotAllowed { agent: String, tool: String },
    #[error("invalid agent: {0}")]
    InvalidAgent(String),
}

/// Runs agents. Holds no per-agent state: the same spec, task and backend
/// always produce the same trace.
#[derive(Clone)]
pub struct AgentRuntime {
    gateway: Arc<Gateway>,
    tools: Arc<ToolRegistry>,
}

impl AgentRuntime {
    pub fn new(gateway: Arc<Gateway>, tools: Arc<ToolRegistry>) -> Self {
        Self { gateway, tools }
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    pub fn tools(&self) -> &Arc<ToolRegistry> {
        &self.tools
    }

    /// Runs `agent` on `task` until it answers without tool calls.
    ///
    /// `only_tool` narrows the agent's toolset to a single tool (direct
    /// tool mode). Events go to `recorder`; each model completion and each
    /// tool execution takes one step from `budget`.
    pub async fn react_loop(
        &self,
        agent: &AgentSpec,
        task: &[Message],
        budget: &StepBudget,
        recorder: &TraceRecorder,
        session_id: &str,
        only_tool: Option<&str>,
    ) -> Result<Message, RuntimeError> {
        if agent.system_prompt.trim().is_empty() {
            return Err(RuntimeError::InvalidAgent(format!(
                "{} has an empty prompt",
                agent.name
            )));
        }
        let allowed: Vec<&String> = agent
            .tool_names
            .iter()
            .filter(|t| only_tool.is_none_or(|o| o == t.as_str()))
            .collect();
        if let Some(t) = only_tool {
            if allowed.is_empty() {
                return Err(RuntimeError::ToolNotAllowed {
                    agent: agent.name.clone(),
                    tool: t.to_string(),
                });
            }
        }
        let specs = allowed
            .iter()
            .filter_map(|t| self.tools.spec(t).cloned())
            .collect::<Vec<_>>();
        let ctx = ToolContext {
            session_id: session_id.to_string(),
            agent: agent.name.clone(),
        };

        let mut messages = Vec::with_capacity(task.len() + 4);
        messages.push(Message::system(agent.system_prompt.clone()));
        messages.extend(task.iter().cloned());

        recorder.record(TraceEvent::AgentStart {
            agent: agent.name.clone(),
        });
        loop {
            budget.take()?;
            let request = ModelRequest::new(&agent.name, &agent.model_binding, messages.clone())
                .with_tools(specs.clone());
            let response = self.gateway.complete(&request).await?;
            recorder.record(TraceEvent::ModelStep {
                agent: agent.name.clone(),
                text: response.text.clone(),
                tool_calls: response.tool_calls.clone(),
            });

            if response.tool_calls.is_empty() {
                let content = response.text.unwrap_or_default();
                recorder.record(TraceEvent::AgentEnd {
                    agent: agent.name.clone(),
                    content: content.clone(),
                });
                return Ok(Message::assistant(content).with_origin(agent.name.clone()));
            }

            messages.push(
                Message::assistant(response.text.clone().unwrap_or_default())
                    .with_tool_calls(response.tool_calls.clone()),
            );
            // Sequential, in emission order.
            for call in &response.tool_calls {
                budget.take()?;
                let observation = if allowed.iter().any(|t| *t == &call.tool) {
                    self.tools.invoke(call, &ctx).await
                } else {
                    crate::message::Observation {
                        call_id: call.call_id.clone(),
                        payload: format!(
                            "error: tool {:?} is not available to {}",
                            call.tool, agent.name
                        ),
                        artifacts: Vec::new(),
                        is_error: true,
                    }
                };
                messages.push(Message::tool_result(&observation));
                recorder.record(TraceEvent::ToolStep {
                    agent: agent.name.clone(),
                    call: call.clone(),
                    observation,
                });
            }
        }
    }
}
