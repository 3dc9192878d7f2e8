//! Client for the OSTI.gov records API, with a recorded-fixture mode.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use async_trait::async_trait;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub const DEFAULT_BASE_URL: &str = "https://www.osti.gov/api/v1/records";
pub const DEFAULT_ROWS_CAP: u32 = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub authors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doi: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, Value>,
}

impl PublicationRecord {
    pub fn citation(&self) -> String {
        let authors = match self.authors.len() {
            0 => "Unknown authors".to_string(),
            1..=3 => self.authors.join("; "),
            _ => format!("{} et al.", self.authors[0]),
        };
        let year = self
            .extra
            .get("publication_date")
            .and_then(Value::as_str)
            .and_then(|d| d.get(..4))
            .map(|y| format!(" ({y})"))
            .unwrap_or_default();
        match &self.doi {
            Some(doi) => format!("{authors}{year}. {}. https://doi.org/{doi}", self.title),
            None => format!("{authors}{year}. {}.", self.title),
        }
    }
}

#[derive(Debug, Error)]
pub enum OstiError {
    #[error("query must not be empty")]
    EmptyQuery,
    #[error("rows must be between 1 and {cap}, got {rows}")]
    Rows { rows: i64, cap: u32 },
    #[error("repository request failed: {0}")]
    Http(String),
    #[error("unparseable repository payload at {field}: {message}")]
    Parse { field: String, message: String },
    #[error("fixture store: {0}")]
    Fixtures(String),
}

fn doi_shape() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^10\.\d{4,9}/\S+$").expect("static regex"))
}

/// Parses the repository's JSON record array.
pub fn parse_records(bytes: &[u8]) -> Result<Vec<PublicationRecord>, OstiError> {
    let err = |field: String, message: &str| OstiError::Parse {
        field,
        message: message.to_string(),
    };
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| err("$".into(), &e.to_string()))?;
    let items = doc
        .as_array()
        .ok_or_else(|| err("$".into(), "expected an array of records"))?;
    let mut out = Vec::with_capacity(items.len());
    for (i, item) in items.iter().enumerate() {
        let obj = item
            .as_object()
            .ok_or_else(|| err(format!("[{i}]"), "expected an object"))?;
        let mut extra = BTreeMap::new();
        let mut title = None;
        let mut description = None;
        let mut authors = Vec::new();
        let mut doi = None;
        for (key, value) in obj {
            let at = || format!("[{i}].{key}");
            match key.as_str() {
                "title" => match value {
                    Value::String(t) if !t.trim().is_empty() => title = Some(t.trim().to_string()),
                    _ => return Err(err(at(), "expected a non-empty string")),
                },
                "description" => match value {
                    Value::Null => {}
                    Value::String(d) => description = Some(d.clone()),
                    _ => return Err(err(at(), "expected a string")),
                },
                "authors" => match value {
                    Value::Null => {}
                    Value::Array(list) => {
                        for (j, a) in list.iter().enumerate() {
                            let name = a.as_str().ok_or_else(|| {
                                err(format!("{}[{j}]", at()), "expected a string")
                            })?;
                            authors.push(name.to_string());
                        }
                    }
                    _ => return Err(err(at(), "expected an array of strings")),
                },
                "doi" => match value {
                    Value::Null => {}
                    Value::String(d) if d.trim().is_empty() => {}
                    Value::String(d) if doi_shape().is_match(d.trim()) => {
                        doi = Some(d.trim().to_string())
                    }
                    Value::String(_) => return Err(err(at(), "not a well-formed DOI")),
                    _ => return Err(err(at(), "expected a string")),
                },
                _ => {
                    extra.insert(key.clone(), value.clone());
                }
            }
        }
        out.push(PublicationRecord {
            title: title.ok_or_else(|| err(format!("[{i}].title"), "missing"))?,
            description,
            authors,
            doi,
            extra,
        });
    }
    Ok(out)
}

#[async_trait]
pub trait RecordSource: Send + Sync {
    /// Raw response body for `query`; `None` when nothing is recorded.
    async fn fetch(&self, query: &str, rows: u32) -> Result<Option<Vec<u8>>, OstiError>;
}

#[derive(Debug, Clone, Deserialize)]
struct FixtureEntry {
    /// Every keyword must occur in the lowercased query.
    keywords: Vec<String>,
    file: String,
}

#[derive(Debug, Deserialize)]
struct FixtureIndex {
    #[serde(default)]
    fixture: Vec<FixtureEntry>,
}

/// Recorded responses, selected by keyword from `index.toml`.
pub struct FixtureSource {
    dir: PathBuf,
    entries: Vec<FixtureEntry>,
}

impl FixtureSource {
    pub fn open(dir: impl AsRef<Path>) -> Result<Self, OstiError> {
        let dir = dir.as_ref().to_path_buf();
        let text = std::fs::read_to_string(dir.join("index.toml")).map_err(|e| {
            OstiError::Fixtures(format!("{}: {e}", dir.join("index.toml").display()))
        })?;
        let index: FixtureIndex =
            toml::from_str(&text).map_err(|e| OstiError::Fixtures(e.to_string()))?;
        Ok(Self {
            dir,
            entries: index.fixture,
        })
    }

    fn select(&self, query: &str) -> Option<&FixtureEntry> {
        let q = query.to_lowercase();
        self.entries.iter().find(|e| {
            !e.keywords.is_empty() && e.keywords.iter().all(|k| q.contains(&k.to_lowercase()))
        })
    }
}

#[async_trait]
impl RecordSource for FixtureSource {
    async fn fetch(&self, query: &str, _rows: u32) -> Result<Option<Vec<u8>>, OstiError> {
        let Some(entry) = self.select(query) else {
            return Ok(None);
        };
        let path = self.dir.join(&entry.file);
        tokio::fs::read(&path)
            .await
            .map(Some)
            .map_err(|e| OstiError::Fixtures(format!("{}: {e}", path.display())))
    }
}

pub struct LiveSource {
    base_url: String,
    client: reqwest::Client,
}

impl LiveSource {
    pub fn new(base_url: &str, timeout: Duration) -> Result<Self, OstiError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| OstiError::Http(e.to_string()))?;
        Ok(Self {
            base_url: base_url.to_string(),
            client,
        })
    }
}

#[async_trait]
impl RecordSource for LiveSource {
    async fn fetch(&self, query: &str, rows: u32) -> Result<Option<Vec<u8>>, OstiError> {
        let resp = self
            .client
            .get(&self.base_url)
            .query(&[("q", query), ("rows", &rows.to_string())])
            .header(reqwest::header::ACCEPT, "application/json")
            .send()
            .await
            .map_err(|e| OstiError::Http(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(OstiError::Http(format!("HTTP {status}")));
        }
        let body = resp
            .bytes()
            .await
            .map_err(|e| OstiError::Http(e.to_string()))?;
        Ok(Some(body.to_vec()))
    }
}

pub struct OstiClient {
    source: Box<dyn RecordSource>,
    rows_cap: u32,
}

impl OstiClient {
    pub fn new(source: Box<dyn RecordSource>, rows_cap: u32) -> Self {
        Self { source, rows_cap }
    }

    pub fn rows_cap(&self) -> u32 {
        self.rows_cap
    }

    pub async fn search(
        &self,
        query: &str,
        rows: i64,
    ) -> Result<Vec<PublicationRecord>, OstiError> {
        let query = query.trim();
        if query.is_empty() {
            return Err(OstiError::EmptyQuery);
        }
        if rows < 1 || rows > self.rows_cap as i64 {
            return Err(OstiError::Rows {
                rows,
                cap: self.rows_cap,
            });
        }
        let Some(body) = self.source.fetch(query, rows as u32).await? else {
            return Ok(Vec::new());
        };
        let mut records = parse_records(&body)?;
        records.truncate(rows as usize);
        Ok(records)
    }
}
