//! HTTP/JSON API over a built [`App`].
//!
//! Routes (payload version [`API_VERSION`]):
//!
//! | method | path                   | notes                                   |
//! |--------|------------------------|-----------------------------------------|
//! | GET    | `/health`              | no identity required                    |
//! | POST   | `/chat`                | one synchronous turn                    |
//! | GET    | `/jobs?session=`       | jobs of one session, oldest first       |
//! | GET    | `/jobs/{id}`           | one job record                          |
//! | GET    | `/jobs/{id}/outputs`   | collected outputs of a finished job     |
//! | GET    | `/artifacts/{id}`      | stored bytes with their content type    |
//!
//! Every route except `/health` requires the configured identity header.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderName, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use copilot_core::jobs::JobError;
use copilot_core::orchestrator::{FailureKind, RunMode, TurnError, TurnResult};
use copilot_core::store::{get_artifact, ArtifactRef};
use copilot_core::trace::{TraceEvent, TraceSummary};
use copilot_core::App;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const API_VERSION: &str = "1";

#[derive(Clone)]
struct ApiState {
    app: Arc<App>,
    identity: HeaderName,
}

/// The user asserted by the front door.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Principal {
    pub user: String,
    pub asserted_by: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuthRejection(pub String);

/// Accepts any request carrying a non-blank identity header.
pub fn authenticate_request(
    headers: &HeaderMap,
    identity: &HeaderName,
) -> Result<Principal, AuthRejection> {
    let value = headers
        .get(identity)
        .ok_or_else(|| AuthRejection(format!("missing {identity} header")))?;
    let user = value
        .to_str()
        .map_err(|_| AuthRejection(format!("{identity} header is not text")))?
        .trim();
    if user.is_empty() {
        return Err(AuthRejection(format!("{identity} header is blank")));
    }
    Ok(Principal {
        user: user.to_string(),
        asserted_by: identity.to_string(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub session_id: String,
    pub message: String,
    #[serde(flatten)]
    pub mode: RunMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChatResponse {
    pub api_version: String,
    pub session_id: String,
    pub user: String,
    pub text: String,
    pub trace: TraceSummary,
    pub artifacts: Vec<ArtifactLink>,
    pub step_count: usize,
    pub events: Vec<TraceEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactLink {
    #[serde(flatten)]
    pub artifact: ArtifactRef,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub category: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TraceEvent>,
}

struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, category: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                category: category.into(),
                message: message.into(),
                trace: Vec::new(),
            },
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (
            self.status,
            Json(json!({ "api_version": API_VERSION, "error": self.body })),
        )
            .into_response()
    }
}

fn turn_error(e: TurnError) -> ApiError {
    let (status, category) = match e.category {
        FailureKind::InvalidMode => (StatusCode::BAD_REQUEST, "invalid_mode"),
        FailureKind::Guardrail => (StatusCode::UNPROCESSABLE_ENTITY, "guardrail"),
        FailureKind::Timeout => (StatusCode::GATEWAY_TIMEOUT, "timeout"),
        FailureKind::Routing => (StatusCode::BAD_GATEWAY, "routing"),
        FailureKind::Model => (StatusCode::BAD_GATEWAY, "model"),
        FailureKind::Budget => (StatusCode::INTERNAL_SERVER_ERROR, "budget"),
        FailureKind::Agent => (StatusCode::INTERNAL_SERVER_ERROR, "agent"),
    };
    ApiError {
        status,
        body: ErrorBody {
            category: category.into(),
            message: e.message,
            trace: e.trace,
        },
    }
}

fn job_error(e: JobError) -> ApiError {
    let status = match &e {
        JobError::NotFound(_) => StatusCode::NOT_FOUND,
        JobError::NotFinished { .. } => StatusCode::CONFLICT,
        JobError::Failed { .. } => StatusCode::UNPROCESSABLE_ENTITY,
        JobError::UnknownKind(_) | JobError::Args(_) | JobError::InputNotFound(_) => {
            StatusCode::BAD_REQUEST
        }
        JobError::Output(..) => StatusCode::INTERNAL_SERVER_ERROR,
    };
    let category = match &e {
        JobError::NotFound(_) => "not_found",
        JobError::NotFinished { .. } => "not_finished",
        JobError::Failed { .. } => "job_failed",
        JobError::Output(..) => "output",
        _ => "bad_request",
    };
    ApiError::new(status, category, e.to_string())
}

pub fn router(app: Arc<App>) -> Router {
    let identity = HeaderName::try_from(app.config.server.identity_header.as_str())
        .unwrap_or(HeaderName::from_static("x-auth-user"));
    let state = ApiState { app, identity };
    let protected = Router::new()
        .route("/chat", post(chat))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(job_status))
        .route("/jobs/{id}/outputs", get(job_outputs))
        .route("/artifacts/{id}", get(artifact))
        .route_layer(middleware::from_fn_with_state(
            state.clone(),
            require_identity,
        ));
    Router::new()
        .route("/health", get(health))
        .merge(protected)
        .with_state(state)
}

async fn require_identity(State(s): State<ApiState>, mut req: Request, next: Next) -> Response {
    match authenticate_request(req.headers(), &s.identity) {
        Ok(p) => {
            req.extensions_mut().insert(p);
            next.run(req).await
        }
        Err(AuthRejection(m)) => {
            ApiError::new(StatusCode::UNAUTHORIZED, "unauthenticated", m).into_response()
        }
    }
}

async fn health(State(s): State<ApiState>) -> Json<Value> {
    Json(json!({
        "api_version": API_VERSION,
        "status": "ok",
        "agents": s.app.engine.registry().agents().iter().map(|a| &a.name).collect::<Vec<_>>(),
    }))
}

/// Parses the body by hand so that malformed JSON and bad modes share one
/// error shape.
pub fn parse_chat_request(body: &[u8]) -> Result<ChatRequest, String> {
    let mut v: Value =
        serde_json::from_slice(body).map_err(|e| format!("body is not JSON: {e}"))?;
    if let Value::Object(map) = &mut v {
        map.entry("mode").or_insert_with(|| json!("full"));
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn artifacts_of(result: &TurnResult) -> Vec<ArtifactLink> {
    let mut out: Vec<ArtifactLink> = Vec::new();
    for e in &result.trace {
        if let TraceEvent::ToolStep { observation, .. } = e {
            for a in &observation.artifacts {
                if !out.iter().any(|x| x.artifact.id == a.id) {
                    out.push(ArtifactLink {
                        link: a.link(),
                        artifact: a.clone(),
                    });
                }
            }
        }
    }
    out
}

async fn chat(
    State(s): State<ApiState>,
    axum::Extension(principal): axum::Extension<Principal>,
    body: Bytes,
) -> Result<Json<ChatResponse>, ApiError> {
    let req = parse_chat_request(&body).map_err(|m| {
        let category = if m.contains("mode") || m.contains("variant") {
            "invalid_mode"
        } else {
            "bad_request"
        };
        ApiError::new(StatusCode::BAD_REQUEST, category, m)
    })?;
    if req.session_id.trim().is_empty() {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "bad_request",
            "session_id must not be empty",
        ));
    }
    tracing::info!(user = %principal.user, session = %req.session_id, "chat turn");
    let result = s
        .app
        .engine
        .run_turn(&req.session_id, &req.message, req.mode)
        .await
        .map_err(turn_error)?;
    Ok(Json(ChatResponse {
        api_version: API_VERSION.into(),
        session_id: result.session_id.clone(),
        user: principal.user,
        text: result.final_message.content.clone(),
        artifacts: artifacts_of(&result),
        trace: result.summary.clone(),
        step_count: result.step_count,
        events: result.trace,
    }))
}

async fn list_jobs(
    State(s): State<ApiState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let session = q
        .get("session")
        .filter(|v| !v.trim().is_empty())
        .ok_or_else(|| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                "bad_request",
                "the session query parameter is required",
            )
        })?;
    Ok(Json(
        json!({ "api_version": API_VERSION, "jobs": s.app.scheduler.list_jobs(session) }),
    ))
}

async fn job_status(
    State(s): State<ApiState>,
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let rec = s.app.scheduler.job_status(&id).map_err(job_error)?;
    if q.get("session").is_some_and(|sess| sess != &rec.session) {
        return Err(job_error(JobError::NotFound(id)));
    }
    Ok(Json(json!({ "api_version": API_VERSION, "job": rec })))
}

async fn job_outputs(
    State(s): State<ApiState>,
    Path(id): Path<String>,
) -> Result<Json<Value>, ApiError> {
    let out = s.app.scheduler.collect_outputs(&id).map_err(job_error)?;
    let links: Vec<ArtifactLink> = out
        .artifacts
        .iter()
        .map(|a| ArtifactLink {
            link: a.link(),
            artifact: a.clone(),
        })
        .collect();
    Ok(Json(
        json!({ "api_version": API_VERSION, "job_id": out.job_id, "text": out.text, "artifacts": links }),
    ))
}

async fn artifact(State(s): State<ApiState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let (bytes, content_type) = get_artifact(s.app.store.as_ref(), &id).map_err(|_| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("artifact {id:?} not found"),
        )
    })?;
    Ok(([(header::CONTENT_TYPE, content_type)], bytes).into_response())
}

/// Binds `addr` and serves until the task is cancelled.
pub async fn serve(app: Arc<App>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(app)).await
}
