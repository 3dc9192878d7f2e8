use std::time::Duration;

use copilot_core::trace::{TraceEvent, TraceSummary};
use serde::Deserialize;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClientError {
    #[error("endpoint unreachable: {0}")]
    Unreachable(String),
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("HTTP {status} ({category}): {message}")]
    Status {
        status: u16,
        category: String,
        message: String,
    },
    #[error("undecodable response: {0}")]
    Decode(String),
}

/// The parts of a chat reply the harness looks at.
#[derive(Debug, Clone, Deserialize)]
pub struct ChatReply {
    pub text: String,
    pub trace: TraceSummary,
    #[serde(default)]
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Deserialize)]
struct ErrorEnvelope {
    error: ErrorBody,
}

#[derive(Debug, Deserialize)]
struct ErrorBody {
    category: String,
    message: String,
}

#[derive(Debug, Clone)]
pub struct ApiClient {
    endpoint: String,
    identity_header: String,
    user: String,
    http: reqwest::Client,
}

impl ApiClient {
    pub fn new(endpoint: &str) -> Self {
        Self {
            endpoint: endpoint.trim_end_matches('/').to_string(),
            identity_header: "X-Auth-User".into(),
            user: "eval-harness".into(),
            http: reqwest::Client::new(),
        }
    }

    pub fn with_identity(mut self, header: &str, user: &str) -> Self {
        self.identity_header = header.to_string();
        self.user = user.to_string();
        self
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    /// One full-copilot turn. `timeout` bounds the whole exchange.
    pub async fn chat(
        &self,
        session: &str,
        message: &str,
        timeout: Duration,
    ) -> Result<ChatReply, ClientError> {
        let send = async {
            let resp = self
                .http
                .post(format!("{}/chat", self.endpoint))
                .header(self.identity_header.as_str(), self.user.as_str())
                .json(&json!({"session_id": session, "message": message, "mode": "full"}))
                .send()
                .await
                .map_err(|e| {
                    if e.is_connect() {
                        ClientError::Unreachable(e.to_string())
                    } else {
                        ClientError::Decode(e.to_string())
                    }
                })?;
            let status = resp.status();
            let body = resp
                .bytes()
                .await
                .map_err(|e| ClientError::Decode(e.to_string()))?;
            if !status.is_success() {
                let (category, message) = match serde_json::from_slice::<ErrorEnvelope>(&body) {
                    Ok(env) => (env.error.category, env.error.message),
                    Err(_) => (
                        "unknown".into(),
                        String::from_utf8_lossy(&body).into_owned(),
                    ),
                };
                return Err(ClientError::Status {
                    status: status.as_u16(),
                    category,
                    message,
                });
            }
            serde_json::from_slice::<ChatReply>(&body)
                .map_err(|e| ClientError::Decode(e.to_string()))
        };
        tokio::time::timeout(timeout, send)
            .await
            .unwrap_or(Err(ClientError::Timeout(timeout)))
    }
}
