//! Chat-completions-compatible HTTP backend.

use std::collections::BTreeMap;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{FinishReason, GatewayError, ModelBackend, ModelRequest, ModelResponse};
use crate::message::{Message, Role, ToolCall};

/// Transport-level failures are retried this many times; semantic failures
/// (4xx, unparseable bodies) never are.
pub const TRANSPORT_RETRIES: u32 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    /// Base URL up to (not including) `/chat/completions`.
    pub base_url: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
}

fn default_timeout() -> u64 {
    120
}

impl RemoteConfig {
    /// Reads `{PREFIX}_BASE_URL`, `{PREFIX}_MODEL` and the optional
    /// `{PREFIX}_API_KEY`.
    pub fn from_env(prefix: &str) -> Option<Self> {
        let get = |k: &str| {
            std::env::var(format!("{prefix}_{k}"))
                .ok()
                .filter(|v| !v.is_empty())
        };
        Some(Self {
            base_url: get("BASE_URL")?,
            model: get("MODEL")?,
            api_key: get("API_KEY"),
            timeout_secs: get("TIMEOUT_SECS")
                .and_then(|v| v.parse().ok())
                .unwrap_or(default_timeout()),
        })
    }
}

pub struct OpenAiCompatBackend {
    client: reqwest::Client,
    config: RemoteConfig,
    backoff: Duration,
}

enum Attempt {
    Retry(String),
    Fail(GatewayError),
}

impl OpenAiCompatBackend {
    pub fn new(config: RemoteConfig) -> Result<Self, GatewayError> {
        let client = reqwest::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GatewayError::Backend(e.to_string()))?;
        Ok(Self {
            client,
            config,
            backoff: Duration::from_millis(200),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn endpoint(&self) -> String {
        format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        )
    }

    async fn attempt(&self, body: &Value, retries: u32) -> Result<ModelResponse, Attempt> {
        let mut req = self.client.post(self.endpoint()).json(body);
        if let Some(key) = &self.config.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req
            .send()
            .await
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status();
        if status.is_server_error() || status.as_u16() == 429 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !status.is_success() {
            return Err(Attempt::Fail(GatewayError::Http {
                status: status.as_u16(),
                retries,
            }));
        }
        let bytes = resp
            .bytes()
            .await
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        parse_completion(&bytes)
            .map(|mut r| {
                r.retries = retries;
                r
            })
            .map_err(|detail| Attempt::Fail(GatewayError::Malformed { detail, retries }))
    }
}

fn wire_message(m: &Message) -> Value {
    let role = match m.role {
        Role::User => "user",
        Role::Assistant => "assistant",
        Role::Tool => "tool",
        Role::System => "system",
    };
    let mut v = json!({ "role": role, "content": m.content });
    if !m.tool_calls.is_empty() {
        v["tool_calls"] = m
            .tool_calls
            .iter()
            .map(|c| {
                json!({
                    "id": c.call_id,
                    "type": "function",
                    "function": {
                        "name": c.tool,
                        "arguments": serde_json::to_string(&c.raw_args).expect("string map serializes"),
                    }
                })
            })
            .collect();
    }
    if let Some(id) = &m.tool_call_id {
        v["tool_call_id"] = json!(id);
    }
    v
}

/// Request body for `request` against `model`.
pub fn request_body(request: &ModelRequest, model: &str) -> Value {
    let mut body = json!({
        "model": model,
        "messages": request.messages.iter().map(wire_message).collect::<Vec<_>>(),
    });
    if !request.tools.is_empty() {
        body["tools"] = request
            .tools
            .iter()
            .map(|t| {
                json!({
                    "type": "function",
                    "function": {
                        "name": t.name,
                        "description": t.model_description(),
                        "parameters": t.json_schema(),
                    }
                })
            })
            .collect();
    }
    if let Some(s) = &request.sampling {
        if let Some(t) = s.temperature {
            body["temperature"] = json!(t);
        }
        if let Some(m) = s.max_tokens {
            body["max_tokens"] = json!(m);
        }
    }
    body
}

fn args_to_text(raw: &str) -> Result<BTreeMap<String, String>, String> {
    if raw.trim().is_empty() {
        return Ok(BTreeMap::new());
    }
    let v: Value =
        serde_json::from_str(raw).map_err(|e| format!("tool arguments are not JSON: {e}"))?;
    let obj = v
        .as_object()
        .ok_or("tool arguments are not a JSON object")?;
    Ok(obj
        .iter()
        .map(|(k, v)| {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            (k.clone(), text)
        })
        .collect())
}

/// Parses a chat-completions response body.
pub fn parse_completion(bytes: &[u8]) -> Result<ModelResponse, String> {
    let v: Value = serde_json::from_slice(bytes).map_err(|e| format!("body is not JSON: {e}"))?;
    let choice = v
        .get("choices")
        .and_then(Value::as_array)
        .and_then(|c| c.first())
        .ok_or("missing choices[0]")?;
    let message = choice.get("message").ok_or("missing choices[0].message")?;
    let text = match message.get("content") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("choices[0].message.content is not a string".into()),
    };
    let mut tool_calls = Vec::new();
    if let Some(calls) = message.get("tool_calls").filter(|c| !c.is_null()) {
        let calls = calls.as_array().ok_or("tool_calls is not an array")?;
        for (i, c) in calls.iter().enumerate() {
            let f = c
                .get("function")
                .ok_or(format!("tool_calls[{i}].function missing"))?;
            let name = f
                .get("name")
                .and_then(Value::as_str)
                .ok_or(format!("tool_calls[{i}].function.name missing"))?;
            let raw = f.get("arguments").and_then(Value::as_str).unwrap_or("");
            let id = c
                .get("id")
                .and_then(Value::as_str)
                .map(str::to_string)
                .unwrap_or_else(|| format!("call_{}", i + 1));
            tool_calls.push(ToolCall {
                call_id: id,
                tool: name.to_string(),
                raw_args: args_to_text(raw).map_err(|e| format!("tool_calls[{i}]: {e}"))?,
            });
        }
    }
    if text.is_none() && tool_calls.is_empty() {
        return Err("message has neither content nor tool_calls".into());
    }
    let finish = match choice.get("finish_reason").and_then(Value::as_str) {
        Some("stop") => FinishReason::Stop,
        Some("tool_calls") => FinishReason::ToolCalls,
        Some("length") => FinishReason::Length,
        _ if !tool_calls.is_empty() => FinishReason::ToolCalls,
        _ => FinishReason::Other,
    };
    Ok(ModelResponse {
        text,
        tool_calls,
        finish,
        retries: 0,
    })
}

#[async_trait]
impl ModelBackend for OpenAiCompatBackend {
    async fn complete(&self, request: &ModelRequest) -> Result<ModelResponse, GatewayError> {
        let body = request_body(request, &self.config.model);
        let mut retries = 0;
        loop {
            match self.attempt(&body, retries).await {
                Ok(r) => return Ok(r),
                Err(Attempt::Fail(e)) => return Err(e),
                Err(Attempt::Retry(detail)) => {
                    if retries >= TRANSPORT_RETRIES {
                        return Err(GatewayError::Transport { detail, retries });
                    }
                    tracing::warn!(backend = %self.config.base_url, %detail, "retrying model request");
                    tokio::time::sleep(self.backoff * 2u32.pow(retries)).await;
                    retries += 1;
                }
            }
        }
    }
}
