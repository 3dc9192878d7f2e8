//! Hypothesis generation with a labelled fallback path.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::{Gateway, GatewayError, ModelRequest};
use crate::message::Message;

pub const GENERATOR_CALLER: &str = "hypothesis_generator";
pub const FALLBACK_CALLER: &str = "hypothesis_fallback";
pub const TOOL_LABEL: &str = "The hypothesis generated by the tool: ";
pub const FALLBACK_LABEL: &str = "Based on the input parameters, the formulated hypothesis is: ";

pub const GENERATOR_PROMPT: &str = "You generate scientific hypotheses for catalysis research. \
Given a topic, return a research plan with three sections, each introduced by its heading on its own line: \
'Objectives:' followed by a bulleted list, 'Theoretical framing:' followed by a paragraph, and \
'Hypothesis:' followed by one testable statement.";

pub const FALLBACK_PROMPT: &str = "The hypothesis tool produced no output. Construct a research plan for the \
topic yourself using the same three sections: 'Objectives:', 'Theoretical framing:' and 'Hypothesis:'.";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchPlan {
    pub objectives: Vec<String>,
    pub theoretical_framing: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Tool,
    Manual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisOutcome {
    /// Text handed back to the agent, label included.
    pub text: String,
    /// Raw model output, unmodified.
    pub raw: String,
    pub source: PlanSource,
    /// Present when the raw text has all three sections.
    pub plan: Option<ResearchPlan>,
}

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("topic must not be empty")]
    EmptyTopic,
    #[error("hypothesis tool failed ({tool}) and the fallback failed too ({fallback})")]
    Backend { tool: String, fallback: String },
}

/// Splits text into the three plan sections. Headings are matched
/// case-insensitively at the start of a line, optionally with markdown
/// emphasis or `#` markers.
pub fn parse_plan(text: &str) -> Option<ResearchPlan> {
    #[derive(Clone, Copy, PartialEq)]
    enum Sec {
        None,
        Obj,
        Frame,
        Hyp,
    }
    let mut sec = Sec::None;
    let (mut obj, mut frame, mut hyp) = (Vec::new(), Vec::new(), Vec::new());
    for line in text.lines() {
        let bare = line
            .trim()
            .trim_start_matches('#')
            .trim()
            .trim_matches('*')
            .trim();
        let lower = bare.to_lowercase();
        let heading = [
            ("objectives", Sec::Obj),
            ("theoretical framing", Sec::Frame),
            ("hypothesis", Sec::Hyp),
        ]
        .into_iter()
        .find(|(h, _)| {
            lower.starts_with(h) && lower[h.len()..].trim_start_matches('*').starts_with(':')
        });
        if let Some((h, s)) = heading {
            sec = s;
            let rest = bare[h.len()..]
                .trim_start_matches('*')
                .trim_start_matches(':')
                .trim()
                .trim_start_matches('*')
                .trim();
            if !rest.is_empty() {
                match s {
                    Sec::Obj => obj.push(rest.to_string()),
                    Sec::Frame => frame.push(rest.to_string()),
                    Sec::Hyp => hyp.push(rest.to_string()),
                    Sec::None => {}
                }
            }
            continue;
        }
        if bare.is_empty() {
            continue;
        }
        match sec {
            Sec::Obj => obj.push(bare.trim_start_matches(['-', '*', '•']).trim().to_string()),
            Sec::Frame => frame.push(bare.to_string()),
            Sec::Hyp => hyp.push(bare.to_string()),
            Sec::None => {}
        }
    }
    let plan = ResearchPlan {
        objectives: obj.into_iter().filter(|o| !o.is_empty()).collect(),
        theoretical_framing: frame.join(" "),
        hypothesis: hyp.join(" "),
    };
    (!plan.objectives.is_empty()
        && !plan.theoretical_framing.is_empty()
        && !plan.hypothesis.is_empty())
    .then_some(plan)
}

pub struct HypothesisGenerator {
    gateway: Arc<Gateway>,
    backend: String,
}

impl HypothesisGenerator {
    pub fn new(gateway: Arc<Gateway>, backend: &str) -> Self {
        Self {
            gateway,
            backend: backend.to_string(),
        }
    }

    async fn ask(&self, caller: &str, prompt: &str, topic: &str) -> Result<String, GatewayError> {
        let req = ModelRequest::new(
            caller,
            &self.backend,
            vec![Message::system(prompt), Message::user(topic)],
        );
        Ok(self.gateway.complete(&req).await?.text.unwrap_or_default())
    }

    /// Tool output is passed through verbatim; the fallback runs only when
    /// the tool returns nothing or fails.
    pub async fn generate(&self, topic: &str) -> Result<HypothesisOutcome, HypothesisError> {
        let topic = topic.trim();
        if topic.is_empty() {
            return Err(HypothesisError::EmptyTopic);
        }
        let tool_failure = match self.ask(GENERATOR_CALLER, GENERATOR_PROMPT, topic).await {
            Ok(raw) if !raw.trim().is_empty() => {
                return Ok(HypothesisOutcome {
                    text: format!("{TOOL_LABEL}{raw}"),
                    plan: parse_plan(&raw),
                    raw,
                    source: PlanSource::Tool,
                })
            }
            Ok(_) => "empty output".to_string(),
            Err(e) => e.to_string(),
        };
        tracing::info!(
            topic,
            "hypothesis tool gave nothing ({tool_failure}); using fallback"
        );
        match self.ask(FALLBACK_CALLER, FALLBACK_PROMPT, topic).await {
            Ok(raw) if !raw.trim().is_empty() => Ok(HypothesisOutcome {
                text: format!("{FALLBACK_LABEL}{raw}"),
                plan: parse_plan(&raw),
                raw,
                source: PlanSource::Manual,
            }),
            Ok(_) => Err(HypothesisError::Backend {
                tool: tool_failure,
                fallback: "empty output".into(),
            }),
            Err(e) => Err(HypothesisError::Backend {
                tool: tool_failure,
                fallback: e.to_string(),
            }),
        }
    }
}
