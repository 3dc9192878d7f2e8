use std::collections::HashMap;
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Mutex;

use super::checkpoint::{CheckpointError, CheckpointStore, CheckpointToken};
use super::registry::AgentRegistry;
use super::supervisor::SupervisorSpec;
use super::{GraphState, RoutingDecision, RunMode, SUPERVISOR};
use crate::gateway::GatewayError;
use crate::message::Message;
use crate::runtime::{AgentRuntime, RuntimeError};
use crate::trace::{summarize, StepBudget, TraceEvent, TraceRecorder, TraceSummary};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    #[serde(default = "default_budget")]
    pub step_budget: usize,
    #[serde(default = "default_timeout")]
    pub turn_timeout_secs: f64,
}

fn default_budget() -> usize {
    16
}

fn default_timeout() -> f64 {
    600.0
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            step_budget: default_budget(),
            turn_timeout_secs: default_timeout(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    Budget,
    Timeout,
    /// The supervisor's model call failed.
    Routing,
    /// A sub-agent's model call failed.
    Model,
    Guardrail,
    InvalidMode,
    Agent,
}

#[derive(Debug, Clone, Error)]
#[error("{category:?}: {message}")]
pub struct TurnError {
    pub category: FailureKind,
    pub message: String,
    /// Events recorded before the failure.
    pub trace: Vec<TraceEvent>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TurnResult {
    pub session_id: String,
    pub final_message: Message,
    pub trace: Vec<TraceEvent>,
    pub summary: TraceSummary,
    pub step_count: usize,
}

type Failure = (FailureKind, String);

fn gateway_failure(e: GatewayError, default: FailureKind) -> Failure {
    let kind = if e.is_guardrail() {
        FailureKind::Guardrail
    } else {
        default
    };
    (kind, e.to_string())
}

fn runtime_failure(e: RuntimeError) -> Failure {
    match e {
        RuntimeError::Budget(b) => (FailureKind::Budget, b.to_string()),
        RuntimeError::Model(g) => gateway_failure(g, FailureKind::Model),
        other => (FailureKind::Agent, other.to_string()),
    }
}

/// Runs turns for many sessions. Turns of one session are serialized by a
/// per-session lock; a turn works on a copy of the session state and only
/// writes it back when it succeeds.
pub struct Engine {
    registry: AgentRegistry,
    supervisor: SupervisorSpec,
    runtime: AgentRuntime,
    config: EngineConfig,
    sessions: std::sync::Mutex<HashMap<String, Arc<Mutex<GraphState>>>>,
    checkpoints: CheckpointStore,
}

impl Engine {
    pub fn new(
        registry: AgentRegistry,
        supervisor: SupervisorSpec,
        runtime: AgentRuntime,
        config: EngineConfig,
    ) -> Self {
        Self {
            registry,
            supervisor,
            runtime,
            config,
            sessions: Default::default(),
            checkpoints: CheckpointStore::new(),
        }
    }

    pub fn registry(&self) -> &AgentRegistry {
        &self.registry
    }

    pub fn runtime(&self) -> &AgentRuntime {
        &self.runtime
    }

    pub fn supervisor(&self) -> &SupervisorSpec {
        &self.supervisor
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    fn session_slot(&self, session_id: &str) -> Arc<Mutex<GraphState>> {
        self.sessions
            .lock()
            .expect("session map lock")
            .entry(session_id.to_string())
            .or_insert_with(|| Arc::new(Mutex::new(GraphState::new(session_id))))
            .clone()
    }

    /// Current state of a session, waiting for any running turn to finish.
    pub async fn session(&self, session_id: &str) -> Option<GraphState> {
        let slot = self
            .sessions
            .lock()
            .expect("session map lock")
            .get(session_id)
            .cloned()?;
        let state = slot.lock().await.clone();
        Some(state)
    }

    /// Replaces a session's live state, e.g. with a restored checkpoint.
    pub async fn load_session(&self, state: GraphState) {
        let slot = self.session_slot(&state.session_id);
        *slot.lock().await = state;
    }

    pub fn save_checkpoint(&self, state: &GraphState) -> CheckpointToken {
        self.checkpoints.save(state)
    }

    pub fn restore_checkpoint(&self, token: &str) -> Result<GraphState, CheckpointError> {
        self.checkpoints.restore(token)
    }

    pub fn validate_mode(&self, mode: &RunMode) -> Result<(), String> {
        if let RunMode::DirectTool { agent, tool } = mode {
            let spec = self
                .registry
                .get(agent)
                .ok_or_else(|| format!("unknown agent {agent:?}"))?;
            if let Some(t) = tool {
                if !spec.tool_names.contains(t) {
                    return Err(format!("agent {agent:?} has no tool {t:?}"));
                }
            }
        }
        Ok(())
    }

    pub async fn run_turn(
        &self,
        session_id: &str,
        user_message: &str,
        mode: RunMode,
    ) -> Result<TurnResult, TurnError> {
        if let Err(message) = self.validate_mode(&mode) {
            return Err(TurnError {
                category: FailureKind::InvalidMode,
                message,
                trace: Vec::new(),
            });
        }
        let slot = self.session_slot(session_id);
        let mut live = slot.lock().await;

        let mut work = live.clone();
        work.mode = mode;
        work.step_count = 0;
        work.active_agent = None;
        work.pending_handoff = None;
        work.transcript.push(Message::user(user_message));

        let recorder = TraceRecorder::new();
        let budget = StepBudget::new(self.config.step_budget);
        let limit = Duration::from_secs_f64(self.config.turn_timeout_secs.max(0.0));
        let outcome = tokio::time::timeout(limit, self.drive(&mut work, &recorder, &budget)).await;

        let failure = match outcome {
            Ok(Ok(final_message)) => {
                work.step_count = budget.used();
                work.active_agent = None;
                work.pending_handoff = None;
                work.transcript.push(final_message.clone());
                *live = work;
                let trace = recorder.snapshot();
                return Ok(TurnResult {
                    session_id: session_id.to_string(),
                    final_message,
                    summary: summarize(&trace),
                    trace,
                    step_count: budget.used(),
                });
            }
            Ok(Err(f)) => f,
            Err(_) => (
                FailureKind::Timeout,
                format!("turn exceeded {}s", self.config.turn_timeout_secs),
            ),
        };
        tracing::warn!(session_id, category = ?failure.0, "turn failed: {}", failure.1);
        Err(TurnError {
            category: failure.0,
            message: failure.1,
            trace: recorder.snapshot(),
        })
    }

    async fn drive(
        &self,
        work: &mut GraphState,
        recorder: &TraceRecorder,
        budget: &StepBudget,
    ) -> Result<Message, Failure> {
        if let RunMode::DirectTool { agent, tool } = work.mode.clone() {
            let spec = self.registry.get(&agent).expect("validated mode");
            work.active_agent = Some(agent.clone());
            let answer = self
                .runtime
                .react_loop(
                    spec,
                    &work.conversation(),
                    budget,
                    recorder,
                    &work.session_id,
                    tool.as_deref(),
                )
                .await
                .map_err(runtime_failure)?;
            recorder.record(TraceEvent::Final {
                content: answer.content.clone(),
            });
            return Ok(answer);
        }

        loop {
            budget
                .take()
                .map_err(|b| (FailureKind::Budget, b.to_string()))?;
            let decision = self
                .supervisor
                .decide(work, &self.registry, self.runtime.gateway())
                .await
                .map_err(|e| gateway_failure(e, FailureKind::Routing))?;
            recorder.record(TraceEvent::Decision {
                decision: decision.clone(),
            });
            match decision {
                RoutingDecision::Handoff { target, .. } => {
                    let spec = self
                        .registry
                        .get(&target)
                        .expect("parse_decision checks registration");
                    work.pending_handoff = Some(target.clone());
                    work.active_agent = work.pending_handoff.take();
                    let answer = self
                        .runtime
                        .react_loop(
                            spec,
                            &work.conversation(),
                            budget,
                            recorder,
                            &work.session_id,
                            None,
                        )
                        .await
                        .map_err(runtime_failure)?;
                    work.transcript.push(answer);
                    work.active_agent = None;
                }
                RoutingDecision::RespondDirectly { rationale }
                | RoutingDecision::Clarify { rationale } => {
                    recorder.record(TraceEvent::Final {
                        content: rationale.clone(),
                    });
                    return Ok(Message::assistant(rationale).with_origin(SUPERVISOR));
                }
            }
        }
    }
}
