//! Engine trace of one turn: routing decisions, model steps, tool steps.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::message::{Observation, ToolCall};
use crate::orchestrator::RoutingDecision;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Decision {
        decision: RoutingDecision,
    },
    AgentStart {
        agent: String,
    },
    ModelStep {
        agent: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        tool_calls: Vec<ToolCall>,
    },
    ToolStep {
        agent: String,
        call: ToolCall,
        observation: Observation,
    },
    AgentEnd {
        agent: String,
        content: String,
    },
    Final {
        content: String,
    },
}

/// Which agents and tools actually ran, in first-use order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub agents: Vec<String>,
    pub tools: Vec<String>,
    pub supervisor_decisions: usize,
}

pub fn summarize(events: &[TraceEvent]) -> TraceSummary {
    let mut s = TraceSummary::default();
    for e in events {
        match e {
            TraceEvent::Decision { .. } => s.supervisor_decisions += 1,
            TraceEvent::AgentStart { agent } if !s.agents.contains(agent) => {
                s.agents.push(agent.clone())
            }
            TraceEvent::ToolStep { call, .. } if !s.tools.contains(&call.tool) => {
                s.tools.push(call.tool.clone())
            }
            _ => {}
        }
    }
    s
}

/// Shared, append-only event log. Clones share the same log so a partial
/// trace survives a cancelled turn.
#[derive(Debug, Clone, Default)]
pub struct TraceRecorder {
    events: Arc<Mutex<Vec<TraceEvent>>>,
}

impl TraceRecorder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, event: TraceEvent) {
        self.events.lock().expect("trace lock").push(event);
    }

    pub fn snapshot(&self) -> Vec<TraceEvent> {
        self.events.lock().expect("trace lock").clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("step budget of {limit} exhausted")]
pub struct BudgetExhausted {
    pub limit: usize,
}

/// Counts model and tool steps against a per-turn limit.
#[derive(Debug)]
pub struct StepBudget {
    limit: usize,
    used: AtomicUsize,
}

impl StepBudget {
    pub fn new(limit: usize) -> Self {
        Self {
            limit,
            used: AtomicUsize::new(0),
        }
    }

    pub fn take(&self) -> Result<(), BudgetExhausted> {
        let prev = self
            .used
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |u| {
                (u < self.limit).then_some(u + 1)
            });
        prev.map(|_| ())
            .map_err(|_| BudgetExhausted { limit: self.limit })
    }

    pub fn used(&self) -> usize {
        self.used.load(Ordering::SeqCst)
    }

    pub fn limit(&self) -> usize {
        self.limit
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_never_exceeds_limit() {
        let b = StepBudget::new(3);
        assert!(b.take().is_ok());
        assert!(b.take().is_ok());
        assert!(b.take().is_ok());
        assert_eq!(b.take(), Err(BudgetExhausted { limit: 3 }));
        assert_eq!(b.used(), 3);
    }

    #[test]
    fn summary_dedups_in_order() {
        let ev = vec![
            TraceEvent::AgentStart {
                agent: "researcher".into(),
            },
            TraceEvent::ToolStep {
                agent: "researcher".into(),
                call: ToolCall::new("1", "osti_search"),
                observation: Observation {
                    call_id: "1".into(),
                    payload: String::new(),
                    artifacts: vec![],
                    is_error: false,
                },
            },
            TraceEvent::AgentStart {
                agent: "researcher".into(),
            },
        ];
        let s = summarize(&ev);
        assert_eq!(s.agents, vec!["researcher"]);
        assert_eq!(s.tools, vec!["osti_search"]);
    }
}
