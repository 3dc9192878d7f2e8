//! Tier-2 filter for model-written analysis scripts.
//!
//! Blocked tokens are matched as plain substrings over the original text.
//! Import statements are parsed line by line only to learn which libraries
//! a script references and to strip them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BLOCKED_TOKENS: [&str; 3] = ["os", "boto3", "__import__"];
pub const DEFAULT_ALLOWED_LIBRARIES: [&str; 4] = ["numpy", "pandas", "matplotlib", "seaborn"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub blocked_tokens: Vec<String>,
    pub allowed_libraries: Vec<String>,
    #[serde(default = "yes")]
    pub strip_imports: bool,
}

fn yes() -> bool {
    true
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            blocked_tokens: DEFAULT_BLOCKED_TOKENS
                .iter()
                .map(|s| s.to_string())
                .collect(),
            allowed_libraries: DEFAULT_ALLOWED_LIBRARIES
                .iter()
                .map(|s| s.to_string())
                .collect(),
            strip_imports: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FilterPolicyError {
    #[error("allowed_libraries is empty")]
    NoLibraries,
    #[error("{0:?} is both blocked and allowed")]
    Overlap(String),
}

impl FilterPolicy {
    pub fn check(&self) -> Result<(), FilterPolicyError> {
        if self.allowed_libraries.is_empty() {
            return Err(FilterPolicyError::NoLibraries);
        }
        if let Some(t) = self
            .blocked_tokens
            .iter()
            .find(|t| self.allowed_libraries.contains(t))
        {
            return Err(FilterPolicyError::Overlap(t.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "snake_case")]
pub enum Rejection {
    BlockedToken(String),
    DisallowedLibrary(String),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::BlockedToken(t) => write!(f, "blocked token {t:?}"),
            Rejection::DisallowedLibrary(l) => write!(f, "library {l:?} is not allowed"),
        }
    }
}

/// A script that passed [`tier2_filter`]. Only the filter constructs these,
/// so the sandbox never sees unchecked code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SanitizedScript {
    text: String,
    libraries: Vec<String>,
}

impl SanitizedScript {
    pub fn text(&self) -> &str {
        &self.text
    }

    /// Allowed libraries the original script imported, in first-use order.
    pub fn libraries(&self) -> &[String] {
        &self.libraries
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOutcome {
    Sanitized(SanitizedScript),
    Rejected(Rejection),
}

impl FilterOutcome {
    pub fn sanitized(&self) -> Option<&SanitizedScript> {
        match self {
            FilterOutcome::Sanitized(s) => Some(s),
            FilterOutcome::Rejected(_) => None,
        }
    }
}

/// Module roots named by one import statement, or None when the statement
/// is not an import.
pub fn import_roots(statement: &str) -> Option<Vec<String>> {
    let s = statement.trim();
    let root = |name: &str| {
        let name = name.trim();
        if name.starts_with('.') {
            ".".to_string()
        } else {
            name.split('.').next().unwrap_or("").trim().to_string()
        }
    };
    if let Some(rest) = s.strip_prefix("import") {
        if !rest.starts_with(|c: char| c.is_whitespace() || c == '\\') {
            return None;
        }
        let rest = rest.replace(['\\', '(', ')', '\n'], " ");
        let roots = rest
            .split(',')
            .map(|part| root(part.split_whitespace().next().unwrap_or("")))
            .filter(|r| !r.is_empty())
            .collect();
        return Some(roots);
    }
    if let Some(rest) = s.strip_prefix("from") {
        if !rest.starts_with(|c: char| c.is_whitespace() || c == '.') {
            return None;
        }
        let mut words = rest.split_whitespace();
        let module = words.next()?;
        if words.next() != Some("import") {
            return None;
        }
        return Some(vec![root(module)]);
    }
    None
}

fn open_parens(s: &str) -> i32 {
    s.chars().fold(0, |n, c| match c {
        '(' => n + 1,
        ')' => n - 1,
        _ => n,
    })
}

/// Splits the script into logical lines (joining backslash and parenthesis
/// continuations of import statements) and reports each one's imports.
fn scan(script: &str) -> Vec<(String, Option<Vec<String>>)> {
    let mut out = Vec::new();
    let mut lines = script.lines().peekable();
    while let Some(line) = lines.next() {
        let mut logical = line.to_string();
        let is_import = line
            .split(';')
            .any(|seg| import_roots(seg.trim_start()).is_some());
        if is_import {
            while (logical.trim_end().ends_with('\\') || open_parens(&logical) > 0)
                && lines.peek().is_some()
            {
                logical.push('\n');
                logical.push_str(lines.next().unwrap_or(""));
            }
            let mut roots = Vec::new();
            for seg in logical.split(';') {
                if let Some(r) = import_roots(seg.trim_start()) {
                    roots.extend(r);
                }
            }
            out.push((logical, Some(roots)));
        } else {
            out.push((logical, None));
        }
    }
    out
}

/// Checks `script` against `policy` and strips its import statements.
pub fn tier2_filter(script: &str, policy: &FilterPolicy) -> FilterOutcome {
    if script.trim().is_empty() {
        return FilterOutcome::Sanitized(SanitizedScript {
            text: String::new(),
            libraries: Vec::new(),
        });
    }
    if let Some(t) = policy
        .blocked_tokens
        .iter()
        .find(|t| !t.is_empty() && script.contains(t.as_str()))
    {
        return FilterOutcome::Rejected(Rejection::BlockedToken(t.clone()));
    }
    let mut libraries: Vec<String> = Vec::new();
    let mut kept = Vec::new();
    for (logical, imports) in scan(script) {
        match imports {
            None => kept.push(logical),
            Some(roots) => {
                for r in roots {
                    if !policy.allowed_libraries.contains(&r) {
                        return FilterOutcome::Rejected(Rejection::DisallowedLibrary(r));
                    }
                    if !libraries.contains(&r) {
                        libraries.push(r);
                    }
                }
                if !policy.strip_imports {
                    kept.push(logical);
                    continue;
                }
                let rest: Vec<&str> = logical
                    .split(';')
                    .filter(|seg| import_roots(seg.trim_start()).is_none())
                    .map(str::trim)
                    .filter(|seg| !seg.is_empty())
                    .collect();
                let indent: String = logical.chars().take_while(|c| c.is_whitespace()).collect();
                if !rest.is_empty() {
                    kept.push(format!("{indent}{}", rest.join("; ")));
                } else if !indent.is_empty() {
                    // keep indented blocks syntactically non-empty
                    kept.push(format!("{indent}pass"));
                }
            }
        }
    }
    let mut text = kept.join("\n");
    if script.ends_with('\n') && !text.is_empty() {
        text.push('\n');
    }
    FilterOutcome::Sanitized(SanitizedScript { text, libraries })
}

/// True when no logical line of `script` is an import statement.
pub fn has_no_imports(script: &str) -> bool {
    scan(script).iter().all(|(_, imports)| imports.is_none())
}
