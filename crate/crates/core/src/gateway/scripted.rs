//! Deterministic rule-driven backend.
//!
//! Rules are tried in order against the request; the first match answers.
//! Response text and tool-call arguments may use placeholders:
//!
//! | placeholder        | value                                                   |
//! |--------------------|---------------------------------------------------------|
//! | `{{task}}`         | latest user message                                     |
//! | `{{task_head}}`    | latest user message up to the first blank line          |
//! | `{{observation}}`  | last tool result or returning sub-agent answer          |
//! | `{{agent}}`        | the calling agent                                       |
//! | `{{tools_used}}`   | tools called so far in this request, comma separated    |
//! | `{{first_number}}` | first number appearing in the latest user message       |
//! | `{{first_file}}`   | first file name (`name.ext`) in the latest user message |
//! | `{{agents_used}}`  | sub-agents that have answered so far, comma separated   |

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{FinishReason, GatewayError, ModelBackend, ModelRequest, ModelResponse};
use crate::message::{Role, ToolCall};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// The last message is the user's task.
    Task,
    /// The last message is a tool result or a returning sub-agent's answer.
    Observation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RuleMatcher {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub caller: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    /// Matches when any keyword occurs in the latest user text (case-insensitive).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub any: Vec<String>,
    /// Every keyword must occur.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub all: Vec<String>,
    /// No keyword may occur.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub none: Vec<String>,
}

impl RuleMatcher {
    pub fn is_catch_all(&self) -> bool {
        self.caller.is_none()
            && self.phase.is_none()
            && self.any.is_empty()
            && self.all.is_empty()
            && self.none.is_empty()
    }

    fn matches(&self, request: &ModelRequest) -> bool {
        if let Some(c) = &self.caller {
            if c != &request.caller {
                return false;
            }
        }
        if let Some(p) = self.phase {
            if p != phase_of(request) {
                return false;
            }
        }
        let text = request.latest_user_text().to_lowercase();
        let has = |k: &String| text.contains(&k.to_lowercase());
        (self.any.is_empty() || self.any.iter().any(has))
            && self.all.iter().all(has)
            && !self.none.iter().any(has)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CannedToolCall {
    pub tool: String,
    #[serde(default)]
    pub args: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CannedResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<CannedToolCall>,
    /// Simulated latency.
    #[serde(default)]
    pub delay_ms: u64,
    /// Simulated backend failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedRule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub when: RuleMatcher,
    pub respond: CannedResponse,
}

impl ScriptedRule {
    pub fn new(when: RuleMatcher, respond: CannedResponse) -> Self {
        Self {
            name: None,
            when,
            respond,
        }
    }

    pub fn catch_all(text: &str) -> Self {
        Self::new(
            RuleMatcher::default(),
            CannedResponse {
                text: Some(text.to_string()),
                ..Default::default()
            },
        )
    }
}

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("rules document does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("rule set has no unconditional catch-all rule")]
    NoCatchAll,
    #[error("rule {0} answers with neither text, tool calls nor an error")]
    EmptyResponse(usize),
}

#[derive(Debug, Deserialize)]
struct RulesDoc {
    #[serde(default)]
    rule: Vec<ScriptedRule>,
}

pub fn phase_of(request: &ModelRequest) -> Phase {
    match request.messages.last() {
        Some(m) if m.role == Role::Tool => Phase::Observation,
        Some(m) if m.role == Role::Assistant && m.origin_agent.is_some() => Phase::Observation,
        _ => Phase::Task,
    }
}

fn first_number(text: &str) -> String {
    let re = Regex::new(r"-?\d+(?:\.\d+)?").expect("static regex");
    re.find(text)
        .map(|m| m.as_str().to_string())
        .unwrap_or_default()
}

fn first_file(text: &str) -> String {
    let re = Regex::new(r"[A-Za-z0-9_\-]+\.(?:json|csv|txt|png|tif|tiff|mp4|avi)\b")
        .expect("static regex");
    re.find(text)
        .map(|m| m.as_str().to_string())
        .unwrap_or_default()
}

struct Bindings {
    values: Vec<(&'static str, String)>,
}

impl Bindings {
    fn for_request(request: &ModelRequest) -> Self {
        let task = request.latest_user_text().to_string();
        let task_head = task.split("\n\n").next().unwrap_or("").trim().to_string();
        let observation = match phase_of(request) {
            Phase::Observation => request
                .messages
                .last()
                .map(|m| m.content.clone())
                .unwrap_or_default(),
            Phase::Task => String::new(),
        };
        let mut tools: Vec<&str> = Vec::new();
        for m in &request.messages {
            for c in &m.tool_calls {
                if !tools.contains(&c.tool.as_str()) {
                    tools.push(&c.tool);
                }
            }
        }
        let tools_used = tools.join(", ");
        // only answers given since the latest user message
        let since = request
            .messages
            .iter()
            .rposition(|m| m.role == Role::User)
            .unwrap_or(0);
        let mut agents: Vec<&str> = Vec::new();
        for m in &request.messages[since..] {
            if let Some(a) = m.origin_agent.as_deref() {
                if m.role == Role::Assistant
                    && a != crate::orchestrator::SUPERVISOR
                    && !agents.contains(&a)
                {
                    agents.push(a);
                }
            }
        }
        let agents_used = agents.join(", ");
        Self {
            values: vec![
                ("{{first_number}}", first_number(&task)),
                ("{{first_file}}", first_file(&task)),
                ("{{agents_used}}", agents_used),
                ("{{task_head}}", task_head),
                ("{{observation}}", observation),
                ("{{tools_used}}", tools_used),
                ("{{agent}}", request.caller.clone()),
                ("{{task}}", task),
            ],
        }
    }

    /// Single-pass substitution so substituted text is never re-expanded.
    fn render(&self, template: &str) -> String {
        let mut out = String::with_capacity(template.len());
        let mut rest = template;
        'outer: while let Some(pos) = rest.find("{{") {
            out.push_str(&rest[..pos]);
            let tail = &rest[pos..];
            for (key, value) in &self.values {
                if tail.starts_with(key) {
                    out.push_str(value);
                    rest = &tail[key.len()..];
                    continue 'outer;
                }
            }
            out.push_str("{{");
            rest = &tail[2..];
        }
        out.push_str(rest);
        out
    }
}

fn prior_call_count(request: &ModelRequest) -> usize {
    request.messages.iter().map(|m| m.tool_calls.len()).sum()
}

/// The first rule matching `request`, or `None` when the set has no
/// applicable rule (impossible for a validated set).
pub fn select_rule<'a>(
    rules: &'a [ScriptedRule],
    request: &ModelRequest,
) -> Option<&'a ScriptedRule> {
    rules.iter().find(|r| r.when.matches(request))
}

/// Pure response selection: identical inputs give identical outputs.
pub fn scripted_match(rules: &[ScriptedRule], request: &ModelRequest) -> ModelResponse {
    let Some(rule) = select_rule(rules, request) else {
        return ModelResponse::text("");
    };
    render_response(&rule.respond, request)
}

fn render_response(canned: &CannedResponse, request: &ModelRequest) -> ModelResponse {
    let b = Bindings::for_request(request);
    let base = prior_call_count(request);
    let tool_calls: Vec<ToolCall> = canned
        .tool_calls
        .iter()
        .enumerate()
        .map(|(i, c)| ToolCall {
            call_id: format!("call_{}", base + i + 1),
            tool: c.tool.clone(),
            raw_args: c
                .args
                .iter()
                .map(|(k, v)| (k.clone(), b.render(v)))
                .collect(),
        })
        .collect();
    let text = canned.text.as_ref().map(|t| b.render(t));
    let finish = if tool_calls.is_empty() {
        FinishReason::Stop
    } else {
        FinishReason::ToolCalls
    };
    ModelResponse {
        text,
        tool_calls,
        finish,
        retries: 0,
    }
}

#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    rules: Vec<ScriptedRule>,
}

impl ScriptedBackend {
    pub fn new(rules: Vec<ScriptedRule>) -> Result<Self, RulesError> {
        if !rules.iter().any(|r| r.when.is_catch_all()) {
            return Err(RulesError::NoCatchAll);
        }
        for (i, r) in rules.iter().enumerate() {
            if r.respond.text.is_none()
                && r.respond.tool_calls.is_empty()
                && r.respond.error.is_none()
            {
                return Err(RulesError::EmptyResponse(i));
            }
        }
        Ok(Self { rules })
    }

    /// Parses a TOML document of `[[rule]]` tables.
    pub fn from_toml(doc: &str) -> Result<Self, RulesError> {
        let parsed: RulesDoc = toml::from_str(doc)?;
        Self::new(parsed.rule)
    }

    pub fn rules(&self) -> &[ScriptedRule] {
        &self.rules
    }

    /// Rules from `first` take precedence over this backend's rules.
    pub fn prepend(&self, first: Vec<ScriptedRule>) -> Self {
        let mut rules = first;
        rules.extend(self.rules.iter().cloned());
        Self { rules }
    }
}

#[async_trait]
impl ModelBackend for ScriptedBackend {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let rule = select_rule(&self.rules, request).expect("validated rule set has a catch-all");
        if rule.respond.delay_ms > 0 {
            tokio::time::sleep(Duration::from_millis(rule.respond.delay_ms)).await;
        }
        if let Some(e) = &rule.respond.error {
            return Err(GatewayError::Backend(e.clone()));
        }
        Ok(render_response(&rule.respond, request))
    }
}
