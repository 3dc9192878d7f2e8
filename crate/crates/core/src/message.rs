//! Conversation messages, tool calls and observations.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::store::ArtifactRef;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    User,
    Assistant,
    Tool,
    System,
}

/// A request from the model to run one tool. Arguments stay as text until
/// they are validated against the tool's schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolCall {
    pub call_id: String,
    pub tool: String,
    #[serde(default)]
    pub raw_args: BTreeMap<String, String>,
}

impl ToolCall {
    pub fn new(call_id: impl Into<String>, tool: impl Into<String>) -> Self {
        Self {
            call_id: call_id.into(),
            tool: tool.into(),
            raw_args: BTreeMap::new(),
        }
    }

    pub fn arg(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.raw_args.insert(key.into(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub call_id: String,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<ArtifactRef>,
    pub is_error: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    /// Set on `Role::Tool` messages: the call this message answers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_call_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin_agent: Option<String>,
}

impl Message {
    fn plain(role: Role, content: impl Into<String>) -> Self {
        Self {
            role,
            content: content.into(),
            tool_calls: Vec::new(),
            tool_call_id: None,
            origin_agent: None,
        }
    }

    pub fn system(content: impl Into<String>) -> Self {
        Self::plain(Role::System, content)
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self::plain(Role::User, content)
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self::plain(Role::Assistant, content)
    }

    pub fn tool_result(observation: &Observation) -> Self {
        Self {
            tool_call_id: Some(observation.call_id.clone()),
            ..Self::plain(Role::Tool, observation.payload.clone())
        }
    }

    pub fn with_origin(mut self, agent: impl Into<String>) -> Self {
        self.origin_agent = Some(agent.into());
        self
    }

    pub fn with_tool_calls(mut self, calls: Vec<ToolCall>) -> Self {
        self.tool_calls = calls;
        self
    }

    /// Messages that carry conversation content rather than tool plumbing.
    pub fn is_conversational(&self) -> bool {
        matches!(self.role, Role::User | Role::Assistant) && self.tool_calls.is_empty()
    }
}

/// Checks that every tool message answers a tool call issued earlier in the
/// same transcript.
pub fn check_tool_pairing(messages: &[Message]) -> Result<(), String> {
    let mut issued = HashSet::new();
    for (i, m) in messages.iter().enumerate() {
        for call in &m.tool_calls {
            issued.insert(call.call_id.as_str());
        }
        if m.role == Role::Tool {
            match m.tool_call_id.as_deref() {
                Some(id) if issued.contains(id) => {}
                Some(id) => return Err(format!("message {i} answers unknown tool call {id}")),
                None => return Err(format!("tool message {i} has no call id")),
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn role_serializes_lowercase() {
        let json = serde_json::to_string(&Message::user("hi")).unwrap();
        assert_eq!(json, r#"{"role":"user","content":"hi"}"#);
    }

    #[test]
    fn tool_pairing() {
        let call = ToolCall::new("c1", "osti_search");
        let obs = Observation {
            call_id: "c1".into(),
            payload: "[]".into(),
            artifacts: vec![],
            is_error: false,
        };
        let ok = vec![
            Message::user("q"),
            Message::assistant("").with_tool_calls(vec![call]),
            Message::tool_result(&obs),
        ];
        assert!(check_tool_pairing(&ok).is_ok());

        let orphan = vec![Message::user("q"), Message::tool_result(&obs)];
        assert!(check_tool_pairing(&orphan).is_err());
    }
}
