use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::outcome::{EvalOutcome, FailureCategory};

/// Table order and row labels for the desk agents.
const DISPLAY: [(&str, &str); 6] = [
    ("analyzer", "Data Analysis"),
    ("hypothesizer", "Hypothesis Generation"),
    ("researcher", "Literature Review"),
    ("simulation", "Simulation"),
    ("segmenter", "Segmentation"),
    ("uq", "Uncertainty Quantification"),
];

pub fn display_name(agent: &str) -> String {
    DISPLAY
        .iter()
        .find(|(a, _)| *a == agent)
        .map_or_else(|| agent.to_string(), |(_, d)| d.to_string())
}

fn rank(agent: &str) -> (usize, String) {
    let i = DISPLAY
        .iter()
        .position(|(a, _)| *a == agent)
        .unwrap_or(DISPLAY.len());
    (i, agent.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentRow {
    pub agent: String,
    pub display: String,
    pub cases: usize,
    pub task_successful: usize,
    pub correct_agent: usize,
}

impl AgentRow {
    pub fn task_success_pct(&self) -> f64 {
        pct(self.task_successful, self.cases)
    }

    pub fn correct_agent_pct(&self) -> f64 {
        pct(self.correct_agent, self.cases)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<AgentRow>,
    pub total_cases: usize,
    pub total_successful: usize,
    pub total_correct: usize,
    pub categories: BTreeMap<String, usize>,
    /// Cases whose self-reported agent list differs from the trace.
    pub self_report_mismatches: Vec<String>,
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

pub fn fmt_pct(v: f64) -> String {
    format!("{v:.1}%")
}

impl EvalReport {
    pub fn task_success_pct(&self) -> f64 {
        pct(self.total_successful, self.total_cases)
    }

    pub fn correct_agent_pct(&self) -> f64 {
        pct(self.total_correct, self.total_cases)
    }

    pub fn row(&self, agent: &str) -> Option<&AgentRow> {
        self.rows.iter().find(|r| r.agent == agent)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<28} {:>16} {:>14}",
            "Agent", "Task Successful", "Correct Agent"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<28} {:>16} {:>14}",
                r.display,
                format!("{}/{}", r.task_successful, r.cases),
                format!("{}/{}", r.correct_agent, r.cases)
            );
        }
        let _ = writeln!(
            s,
            "{:<28} {:>16} {:>14}",
            "Total",
            fmt_pct(self.task_success_pct()),
            fmt_pct(self.correct_agent_pct())
        );
        s
    }

    /// Counts plus rendered percentages, all derived from the counts.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "agent": r.agent,
                    "display": r.display,
                    "cases": r.cases,
                    "task_successful": r.task_successful,
                    "correct_agent": r.correct_agent,
                    "task_success_pct": fmt_pct(r.task_success_pct()),
                    "correct_agent_pct": fmt_pct(r.correct_agent_pct()),
                })
            })
            .collect();
        serde_json::json!({
            "rows": rows,
            "total_cases": self.total_cases,
            "total_successful": self.total_successful,
            "total_correct": self.total_correct,
            "task_success_pct": fmt_pct(self.task_success_pct()),
            "correct_agent_pct": fmt_pct(self.correct_agent_pct()),
            "categories": self.categories,
            "self_report_mismatches": self.self_report_mismatches,
        })
    }
}

fn category_key(c: FailureCategory) -> String {
    serde_json::to_value(c)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

pub fn score_outcomes(outcomes: &[EvalOutcome]) -> EvalReport {
    let mut rows: BTreeMap<(usize, String), AgentRow> = BTreeMap::new();
    let mut categories = BTreeMap::new();
    let mut mismatches = Vec::new();
    for o in outcomes {
        let row = rows
            .entry(rank(&o.target_agent))
            .or_insert_with(|| AgentRow {
                agent: o.target_agent.clone(),
                display: display_name(&o.target_agent),
                cases: 0,
                task_successful: 0,
                correct_agent: 0,
            });
        row.cases += 1;
        row.task_successful += o.task_success as usize;
        row.correct_agent += o.routing_correct() as usize;
        *categories.entry(category_key(o.category)).or_insert(0) += 1;
        if o.self_report_agrees() == Some(false) {
            mismatches.push(o.case_id.clone());
        }
    }
    mismatches.sort();
    let rows: Vec<AgentRow> = rows.into_values().collect();
    EvalReport {
        total_cases: rows.iter().map(|r| r.cases).sum(),
        total_successful: rows.iter().map(|r| r.task_successful).sum(),
        total_correct: rows.iter().map(|r| r.correct_agent).sum(),
        rows,
        categories,
        self_report_mismatches: mismatches,
    }
}
