use std::sync::OnceLock;
use std::time::Duration;

use copilot_core::trace::TraceEvent;
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::case::EvalCase;
use crate::client::{ChatReply, ClientError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureCategory {
    None,
    Timeout,
    Hallucination,
    NoRoute,
    Misroute,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub case_id: String,
    pub target_agent: String,
    pub task_success: bool,
    pub invoked_agents: Vec<String>,
    pub invoked_tools: Vec<String>,
    pub latency_ms: u64,
    pub category: FailureCategory,
    /// Agents the answer claims to have used, when it says so.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_reported: Option<Vec<String>>,
    #[serde(default)]
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EvalOutcome {
    pub fn routing_correct(&self) -> bool {
        self.invoked_agents.contains(&self.target_agent)
    }

    /// False when the answer names a different agent set than the trace.
    pub fn self_report_agrees(&self) -> Option<bool> {
        let claimed = self.self_reported.as_ref()?;
        let mut a = claimed.clone();
        let mut b = self.invoked_agents.clone();
        a.sort();
        b.sort();
        Some(a == b)
    }
}

/// Case-insensitive phrase match on the final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefusalDetector {
    pub phrases: Vec<String>,
}

impl Default for RefusalDetector {
    fn default() -> Self {
        Self {
            phrases: [
                "i cannot help",
                "i can't help",
                "i am unable to",
                "i'm unable to",
                "i do not have a scripted answer",
                "i won't be able to",
                "as an ai",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        }
    }
}

impl RefusalDetector {
    pub fn is_refusal(&self, text: &str) -> bool {
        let t = text.to_lowercase();
        self.phrases.iter().any(|p| t.contains(&p.to_lowercase()))
    }
}

fn claim_patterns() -> &'static [Regex; 2] {
    static RE: OnceLock<[Regex; 2]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            Regex::new(r"/artifacts/[A-Za-z0-9][A-Za-z0-9._-]*[A-Za-z0-9]").expect("static regex"),
            Regex::new(r"job-[0-9a-f]{32}").expect("static regex"),
        ]
    })
}

/// Artifact links and job ids in `text` that no tool observation produced.
pub fn unsupported_claims(text: &str, events: &[TraceEvent]) -> Vec<String> {
    let mut evidence = String::new();
    for e in events {
        if let TraceEvent::ToolStep { observation, .. } = e {
            evidence.push_str(&observation.payload);
            evidence.push('\n');
            for a in &observation.artifacts {
                evidence.push_str(&a.link());
                evidence.push('\n');
            }
        }
    }
    let mut out = Vec::new();
    for re in claim_patterns() {
        for m in re.find_iter(text) {
            if !evidence.contains(m.as_str()) && !out.iter().any(|c| c == m.as_str()) {
                out.push(m.as_str().to_string());
            }
        }
    }
    out
}

/// Agent names after a "Sub-agents utilized:" line, if the answer has one.
pub fn self_reported_agents(text: &str) -> Option<Vec<String>> {
    let line = text.lines().rev().find(|l| {
        l.to_lowercase()
            .trim_start()
            .starts_with("sub-agents utilized:")
    })?;
    let (_, rest) = line.split_once(':')?;
    let names: Vec<String> = rest
        .split([',', ';'])
        .flat_map(|s| s.split(" and "))
        .map(|s| {
            s.trim()
                .trim_matches(|c: char| c == '.' || c == '*' || c == '`')
                .to_string()
        })
        .filter(|s| !s.is_empty() && s != "none")
        .collect();
    Some(names)
}

/// Judges one case. Precedence: timeout, error, hallucination, no-route,
/// misroute.
pub fn categorize(
    case: &EvalCase,
    result: Result<ChatReply, ClientError>,
    latency: Duration,
    refusal: &RefusalDetector,
) -> EvalOutcome {
    let latency_ms = latency.as_millis() as u64;
    let reply = match result {
        Ok(r) => r,
        Err(e) => {
            let category = match e {
                ClientError::Timeout(_) => FailureCategory::Timeout,
                _ => FailureCategory::Error,
            };
            return EvalOutcome {
                case_id: case.id.clone(),
                target_agent: case.target_agent.clone(),
                task_success: false,
                invoked_agents: Vec::new(),
                invoked_tools: Vec::new(),
                latency_ms,
                category,
                self_reported: None,
                response: String::new(),
                error: Some(e.to_string()),
            };
        }
    };
    let claims = unsupported_claims(&reply.text, &reply.events);
    let agents = reply.trace.agents.clone();
    let category = if !claims.is_empty() {
        FailureCategory::Hallucination
    } else if agents.is_empty() {
        FailureCategory::NoRoute
    } else if !agents.contains(&case.target_agent) {
        FailureCategory::Misroute
    } else {
        FailureCategory::None
    };
    let answered = !reply.text.trim().is_empty() && !refusal.is_refusal(&reply.text);
    let task_success =
        answered && matches!(category, FailureCategory::None | FailureCategory::Misroute);
    EvalOutcome {
        case_id: case.id.clone(),
        target_agent: case.target_agent.clone(),
        task_success,
        invoked_agents: agents,
        invoked_tools: reply.trace.tools,
        latency_ms,
        category,
        self_reported: self_reported_agents(&reply.text),
        error: (!claims.is_empty()).then(|| format!("unsupported: {}", claims.join(", "))),
        response: reply.text,
    }
}
