use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCase {
    pub id: String,
    /// Agent the supervisor is expected to hand off to.
    pub target_agent: String,
    pub prompt: String,
    pub suite: String,
}

const UNAMBIGUOUS: &str = include_str!("../suites/unambiguous.jsonl");
const AMBIGUOUS: &str = include_str!("../suites/ambiguous.jsonl");

/// 20 cases for each of the six desk agents.
pub fn unambiguous_suite() -> Vec<EvalCase> {
    parse_cases(UNAMBIGUOUS).expect("bundled suite parses")
}

/// Prompts whose wording pulls a lexical router to the wrong agent.
pub fn ambiguous_suite() -> Vec<EvalCase> {
    parse_cases(AMBIGUOUS).expect("bundled suite parses")
}

pub fn parse_cases(text: &str) -> Result<Vec<EvalCase>, EvalError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let case: EvalCase = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if case.prompt.trim().is_empty() || case.target_agent.trim().is_empty() {
            return Err(EvalError::Parse {
                line: i + 1,
                message: "prompt and target_agent must be non-empty".into(),
            });
        }
        if !seen.insert(case.id.clone()) {
            return Err(EvalError::Parse {
                line: i + 1,
                message: format!("duplicate case id {:?}", case.id),
            });
        }
        out.push(case);
    }
    Ok(out)
}

pub fn load_cases(path: &Path) -> Result<Vec<EvalCase>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_cases(&text)
}

pub fn save_cases(path: &Path, cases: &[EvalCase]) -> Result<(), EvalError> {
    let mut text = String::new();
    for c in cases {
        text.push_str(&serde_json::to_string(c).expect("case serializes"));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Case ids must be unique and every target registered.
pub fn check_targets(cases: &[EvalCase], agents: &[String]) -> Result<(), String> {
    for c in cases {
        if !agents.contains(&c.target_agent) {
            return Err(format!(
                "case {} targets unknown agent {:?}",
                c.id, c.target_agent
            ));
        }
    }
    Ok(())
}
