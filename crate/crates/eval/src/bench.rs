use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use regex::Regex;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tokio::task::JoinSet;

use crate::client::{ApiClient, ClientError};
use crate::outcome::RefusalDetector;
use crate::EvalError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchmarkQuestion {
    pub id: String,
    pub question: String,
    pub answer: String,
    pub topic: String,
}

pub fn parse_questions(text: &str) -> Result<Vec<BenchmarkQuestion>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: BenchmarkQuestion = serde_json::from_str(line).map_err(|e| EvalError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        if q.question.trim().is_empty() || q.topic.trim().is_empty() {
            return Err(EvalError::Parse {
                line: i + 1,
                message: "question and topic must be non-empty".into(),
            });
        }
        out.push(q);
    }
    Ok(out)
}

pub fn load_questions(path: &Path) -> Result<Vec<BenchmarkQuestion>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_questions(&text)
}

pub const ANSWER_INSTRUCTION: &str = "Give your final answer between [ANSWER] and [/ANSWER].";

fn answer_tags() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?is)\[ANSWER\](.*?)\[/ANSWER\]").expect("static regex"))
}

pub fn extract_answer(text: &str) -> Option<String> {
    answer_tags()
        .captures(text)
        .map(|c| c[1].trim().to_string())
        .filter(|a| !a.is_empty())
}

fn normalize(s: &str) -> String {
    s.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionResult {
    pub id: String,
    pub topic: String,
    pub completed: bool,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicRow {
    pub topic: String,
    pub total: usize,
    pub completed: usize,
    pub correct: usize,
}

fn pct(n: usize, d: usize) -> f64 {
    if d == 0 {
        0.0
    } else {
        100.0 * n as f64 / d as f64
    }
}

impl TopicRow {
    pub fn completion_pct(&self) -> f64 {
        pct(self.completed, self.total)
    }

    pub fn correctness_pct(&self) -> f64 {
        pct(self.correct, self.total)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub topics: Vec<TopicRow>,
    pub overall: TopicRow,
    pub results: Vec<QuestionResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl BenchmarkReport {
    pub fn from_results(results: Vec<QuestionResult>, aborted: Option<String>) -> Self {
        let mut by_topic: BTreeMap<String, TopicRow> = BTreeMap::new();
        for r in &results {
            let row = by_topic.entry(r.topic.clone()).or_insert_with(|| TopicRow {
                topic: r.topic.clone(),
                total: 0,
                completed: 0,
                correct: 0,
            });
            row.total += 1;
            row.completed += r.completed as usize;
            row.correct += r.correct as usize;
        }
        let topics: Vec<TopicRow> = by_topic.into_values().collect();
        let overall = TopicRow {
            topic: "Overall".into(),
            total: topics.iter().map(|t| t.total).sum(),
            completed: topics.iter().map(|t| t.completed).sum(),
            correct: topics.iter().map(|t| t.correct).sum(),
        };
        Self {
            topics,
            overall,
            results,
            aborted,
        }
    }

    pub fn topic(&self, name: &str) -> Option<&TopicRow> {
        self.topics.iter().find(|t| t.topic == name)
    }

    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<32} {:>8} {:>10} {:>10}\n",
            "Topic", "Count", "Success", "Correct"
        );
        for t in self.topics.iter().chain(std::iter::once(&self.overall)) {
            s.push_str(&format!(
                "{:<32} {:>8} {:>9.2}% {:>9.2}%\n",
                t.topic,
                t.total,
                t.completion_pct(),
                t.correctness_pct()
            ));
        }
        s
    }
}

/// Sends every question as a full-copilot turn. A question is completed
/// when the API returns a non-empty, non-refusal answer, and correct when the
/// tagged answer matches the key.
pub async fn run_benchmark(
    client: &ApiClient,
    questions: &[BenchmarkQuestion],
    timeout: Duration,
    parallelism: usize,
) -> BenchmarkReport {
    let refusal = RefusalDetector::default();
    let permits = Arc::new(Semaphore::new(parallelism.max(1)));
    let stop = Arc::new(AtomicBool::new(false));
    let mut set = JoinSet::new();
    for (i, q) in questions.iter().cloned().enumerate() {
        let (client, permits, stop, refusal) = (
            client.clone(),
            permits.clone(),
            stop.clone(),
            refusal.clone(),
        );
        set.spawn(async move {
            let _permit = permits.acquire_owned().await.expect("semaphore open");
            if stop.load(Ordering::SeqCst) {
                return (i, None, None);
            }
            let message = format!("{}\n\n{ANSWER_INSTRUCTION}", q.question.trim_end());
            let result = client
                .chat(&format!("bench-{}", q.id), &message, timeout)
                .await;
            let mut r = QuestionResult {
                id: q.id.clone(),
                topic: q.topic.clone(),
                completed: false,
                correct: false,
                extracted: None,
                error: None,
            };
            match result {
                Ok(reply) => {
                    r.completed = !reply.text.trim().is_empty() && !refusal.is_refusal(&reply.text);
                    r.extracted = extract_answer(&reply.text);
                    r.correct = r.completed
                        && r.extracted
                            .as_deref()
                            .is_some_and(|a| normalize(a) == normalize(&q.answer));
                }
                Err(ClientError::Unreachable(e)) => {
                    stop.store(true, Ordering::SeqCst);
                    return (i, None, Some(e));
                }
                Err(e) => r.error = Some(e.to_string()),
            }
            (i, Some(r), None)
        });
    }
    let mut done = Vec::new();
    let mut aborted = None;
    while let Some(joined) = set.join_next().await {
        let (i, r, err) = joined.expect("question task panicked");
        if let Some(r) = r {
            done.push((i, r));
        }
        if aborted.is_none() {
            aborted = err;
        }
    }
    done.sort_by_key(|(i, _)| *i);
    BenchmarkReport::from_results(done.into_iter().map(|(_, r)| r).collect(), aborted)
}

const TOPICS: [&str; 4] = [
    "Analytical Chemistry",
    "General Chemistry",
    "Materials Science",
    "Physical Chemistry",
];

/// `total` multiple-choice questions keyed "A". The last `total - answered`
/// carry a word the desk guardrail rejects, so exactly `answered` complete.
pub fn synthetic_benchmark(total: usize, answered: usize) -> Vec<BenchmarkQuestion> {
    assert!(answered <= total, "answered must not exceed total");
    (0..total)
        .map(|i| {
            let question = if i < answered {
                format!("Item {i}: which sample has the higher surface area? A) the smaller crystallites B) the larger crystallites")
            } else {
                format!("Item {i}: which subprocess call lists the lab directory? A) ls B) dir")
            };
            BenchmarkQuestion {
                id: format!("q{i:05}"),
                question,
                answer: "A".into(),
                topic: TOPICS[i % TOPICS.len()].into(),
            }
        })
        .collect()
}
