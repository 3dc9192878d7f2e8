use std::collections::HashSet;
use std::sync::OnceLock;

use copilot_core::gateway::{Gateway, ModelRequest};
use copilot_core::message::Message;
use regex::Regex;

use crate::case::EvalCase;
use crate::EvalError;

/// The case-generation template with the count and the agent section filled in.
pub fn test_gen_prompt(count: usize, agent_display: &str, agent_prompt: &str) -> String {
    format!(
        "I want to focus on basic functionality tests for now of a research assistant for catalysis science. I need to test tool invocations. the supervisor agent calls other agents that perform specific tasks. For the performance of the tasks, various tools are available. Give me {count} distinct cases to test the agent. \nHere are the prompts for the agents I will be testing:\n* {agent_display}\n{}",
        agent_prompt.trim()
    )
}

fn item_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(?:\d+[.)]|[-*\u{2022}])\s*").expect("static regex"))
}

/// One prompt per list item; headings and comment lines are dropped.
pub fn parse_generated(text: &str) -> Vec<String> {
    text.lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .filter_map(|l| {
            let item = item_prefix().replace(l, "");
            let item = item.trim().trim_matches('"').trim();
            (item.len() > 8 && !item.ends_with(':')).then(|| item.to_string())
        })
        .collect()
}

/// Asks `backend` for `count` prompts aimed at `agent`.
pub async fn generate_case_suite(
    gateway: &Gateway,
    backend: &str,
    agent: &str,
    agent_display: &str,
    agent_prompt: &str,
    count: usize,
) -> Result<Vec<EvalCase>, EvalError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    let request = ModelRequest::new(
        "case_generator",
        backend,
        vec![Message::user(test_gen_prompt(
            count,
            agent_display,
            agent_prompt,
        ))],
    );
    let response = gateway.complete(&request).await?;
    let mut seen = HashSet::new();
    let mut cases = Vec::new();
    for prompt in parse_generated(response.text_or_empty()) {
        if !seen.insert(prompt.to_lowercase()) {
            tracing::warn!(agent, prompt = %prompt, "dropping duplicate generated case");
            continue;
        }
        if cases.len() == count {
            break;
        }
        cases.push(EvalCase {
            id: format!("{agent}-{:02}", cases.len() + 1),
            target_agent: agent.to_string(),
            prompt,
            suite: "generated".into(),
        });
    }
    if cases.len() < count {
        tracing::warn!(
            agent,
            wanted = count,
            got = cases.len(),
            "backend produced fewer distinct cases than asked"
        );
    }
    Ok(cases)
}
