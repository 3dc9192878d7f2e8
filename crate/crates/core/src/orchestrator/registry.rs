use serde::Serialize;
use thiserror::Error;

use crate::runtime::{AgentSpec, ToolRegistry};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("agent {0:?} is already registered")]
    DuplicateName(String),
    #[error("agent {agent:?} references unknown tool {tool:?}")]
    UnknownTool { agent: String, tool: String },
    #[error("agent {0:?} has an empty prompt")]
    EmptyPrompt(String),
    #[error("agent name {0:?} is invalid")]
    InvalidName(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AgentHandle {
    pub name: String,
    pub index: usize,
}

/// Agents addressable by the supervisor and by direct-tool mode, in
/// registration order.
#[derive(Debug, Clone, Default)]
pub struct AgentRegistry {
    agents: Vec<AgentSpec>,
}

impl AgentRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_agent(
        &mut self,
        spec: AgentSpec,
        tools: &ToolRegistry,
    ) -> Result<AgentHandle, RegistryError> {
        let valid_name = !spec.name.is_empty()
            && spec.name != super::SUPERVISOR
            && spec
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
        if !valid_name {
            return Err(RegistryError::InvalidName(spec.name));
        }
        if self.get(&spec.name).is_some() {
            return Err(RegistryError::DuplicateName(spec.name));
        }
        if spec.system_prompt.trim().is_empty() {
            return Err(RegistryError::EmptyPrompt(spec.name));
        }
        if let Some(t) = spec.tool_names.iter().find(|t| !tools.contains(t)) {
            return Err(RegistryError::UnknownTool {
                agent: spec.name.clone(),
                tool: t.clone(),
            });
        }
        let handle = AgentHandle {
            name: spec.name.clone(),
            index: self.agents.len(),
        };
        self.agents.push(spec);
        Ok(handle)
    }

    pub fn get(&self, name: &str) -> Option<&AgentSpec> {
        self.agents.iter().find(|a| a.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    pub fn agents(&self) -> &[AgentSpec] {
        &self.agents
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }
}
