//! Uniform completion interface over pluggable model backends.
//!
//! Every request is screened by the tier-1 guardrail before it reaches a
//! backend, and every response is screened with the same policy before it
//! is returned.

pub mod guardrail;
pub mod remote;
pub mod scripted;

use std::collections::HashMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use crate::message::{Message, Role, ToolCall};
use crate::runtime::schema::ToolSpec;

pub use guardrail::{BlockReason, Guardrail, GuardrailPolicy, ScreenResult};
pub use remote::{OpenAiCompatBackend, RemoteConfig};
pub use scripted::{ScriptedBackend, ScriptedRule};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelRequest {
    /// Agent or tool issuing the completion (e.g. `supervisor`,
    /// `researcher`, `hypothesis_generator`).
    pub caller: String,
    pub backend: String,
    pub messages: Vec<Message>,
    pub tools: Vec<ToolSpec>,
    pub sampling: Option<Sampling>,
}

impl ModelRequest {
    pub fn new(caller: &str, backend: &str, messages: Vec<Message>) -> Self {
        Self {
            caller: caller.to_string(),
            backend: backend.to_string(),
            messages,
            tools: Vec::new(),
            sampling: None,
        }
    }

    pub fn with_tools(mut self, tools: Vec<ToolSpec>) -> Self {
        self.tools = tools;
        self
    }

    /// Content of the most recent user message.
    pub fn latest_user_text(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map_or("", |m| m.content.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    ToolCalls,
    Length,
    Other,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: Option<String>,
    #[serde(default)]
    pub tool_calls: Vec<ToolCall>,
    pub finish: FinishReason,
    /// Transport retries spent before this response arrived.
    #[serde(default)]
    pub retries: u32,
}

impl ModelResponse {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: Some(text.into()),
            tool_calls: Vec::new(),
            finish: FinishReason::Stop,
            retries: 0,
        }
    }

    pub fn calls(calls: Vec<ToolCall>) -> Self {
        Self {
            text: None,
            tool_calls: calls,
            finish: FinishReason::ToolCalls,
            retries: 0,
        }
    }

    pub fn text_or_empty(&self) -> &str {
        self.text.as_deref().unwrap_or("")
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum GatewayError {
    #[error("request blocked by guardrail: {0}")]
    Guardrail(BlockReason),
    #[error("response blocked by guardrail: {0}")]
    OutputBlocked(BlockReason),
    #[error("unknown model backend {0:?}")]
    UnknownBackend(String),
    #[error("transport failure after {retries} retries: {detail}")]
    Transport { detail: String, retries: u32 },
    #[error("backend returned HTTP {status} after {retries} retries")]
    Http { status: u16, retries: u32 },
    #[error("malformed backend payload after {retries} retries: {detail}")]
    Malformed { detail: String, retries: u32 },
    #[error("backend failure: {0}")]
    Backend(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
}

impl GatewayError {
    pub fn is_guardrail(&self) -> bool {
        matches!(
            self,
            GatewayError::Guardrail(_) | GatewayError::OutputBlocked(_)
        )
    }
}

#[async_trait]
pub trait ModelBackend: Send + Sync {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError>;
}

/// Spaces requests to one backend at least `interval` apart.
struct RateCap {
    interval: Duration,
    next: Mutex<Instant>,
}

impl RateCap {
    async fn wait(&self) {
        let slot = {
            let mut next = self.next.lock().await;
            let now = Instant::now();
            let slot = (*next).max(now);
            *next = slot + self.interval;
            slot
        };
        tokio::time::sleep_until(slot.into()).await;
    }
}

struct BackendEntry {
    backend: Arc<dyn ModelBackend>,
    rate: Option<RateCap>,
}

/// Routes requests to named backends behind the guardrail.
pub struct Gateway {
    backends: HashMap<String, BackendEntry>,
    guardrail: Guardrail,
}

impl Gateway {
    pub fn new(guardrail: Guardrail) -> Self {
        Self {
            backends: HashMap::new(),
            guardrail,
        }
    }

    pub fn with_backend(mut self, id: &str, backend: Arc<dyn ModelBackend>) -> Self {
        self.add_backend(id, backend, None);
        self
    }

    pub fn add_backend(
        &mut self,
        id: &str,
        backend: Arc<dyn ModelBackend>,
        requests_per_second: Option<f64>,
    ) {
        let rate = requests_per_second.filter(|r| *r > 0.0).map(|r| RateCap {
            interval: Duration::from_secs_f64(1.0 / r),
            next: Mutex::new(Instant::now()),
        });
        self.backends
            .insert(id.to_string(), BackendEntry { backend, rate });
    }

    pub fn has_backend(&self, id: &str) -> bool {
        self.backends.contains_key(id)
    }

    pub fn guardrail(&self) -> &Guardrail {
        &self.guardrail
    }

    /// Screens the user-authored parts of a request. System prompts and tool
    /// observations are trusted plumbing and are not screened.
    pub fn screen_request(&self, request: &ModelRequest) -> ScreenResult {
        for m in request.messages.iter().filter(|m| m.role == Role::User) {
            if let blocked @ ScreenResult::Blocked(_) = self.guardrail.screen(&m.content) {
                return blocked;
            }
        }
        ScreenResult::Pass
    }

    fn screen_response(&self, response: &ModelResponse) -> ScreenResult {
        if let blocked @ ScreenResult::Blocked(_) = self.guardrail.screen(response.text_or_empty())
        {
            return blocked;
        }
        for call in &response.tool_calls {
            for v in call.raw_args.values() {
                if let blocked @ ScreenResult::Blocked(_) = self.guardrail.screen(v) {
                    return blocked;
                }
            }
        }
        ScreenResult::Pass
    }

    pub async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        if request.messages.is_empty() {
            return Err(GatewayError::InvalidRequest("no messages".into()));
        }
        let entry = self
            .backends
            .get(&request.backend)
            .ok_or_else(|| GatewayError::UnknownBackend(request.backend.clone()))?;
        if let ScreenResult::Blocked(reason) = self.screen_request(request) {
            return Err(GatewayError::Guardrail(reason));
        }
        if let Some(rate) = &entry.rate {
            rate.wait().await;
        }
        let response = entry.backend.complete(request).await?;
        if response.text.is_none() && response.tool_calls.is_empty() {
            return Err(GatewayError::Malformed {
                detail: "response has neither text nor tool calls".into(),
                retries: response.retries,
            });
        }
        if let ScreenResult::Blocked(reason) = self.screen_response(&response) {
            return Err(GatewayError::OutputBlocked(reason));
        }
        Ok(response)
    }
}
