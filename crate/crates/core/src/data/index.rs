//! Keyword index with TF-IDF ranking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

/// Lowercases and splits on anything that is not alphanumeric, so formula
/// tokens like `TiO2` stay whole.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub record_id: String,
    pub terms: BTreeMap<String, u32>,
}

impl IndexEntry {
    pub fn from_text(record_id: &str, text: &str) -> Self {
        let mut terms = BTreeMap::new();
        for t in tokenize(text) {
            *terms.entry(t).or_insert(0) += 1;
        }
        Self {
            record_id: record_id.to_string(),
            terms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchHit {
    pub record_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, Default)]
pub struct KeywordIndex {
    entries: BTreeMap<String, IndexEntry>,
    doc_freq: BTreeMap<String, u32>,
}

impl KeywordIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, record_id: &str) -> bool {
        self.entries.contains_key(record_id)
    }

    /// Adds or replaces the entry for its record.
    pub fn upsert(&mut self, entry: IndexEntry) {
        self.remove(&entry.record_id.clone());
        for t in entry.terms.keys() {
            *self.doc_freq.entry(t.clone()).or_insert(0) += 1;
        }
        self.entries.insert(entry.record_id.clone(), entry);
    }

    pub fn remove(&mut self, record_id: &str) {
        if let Some(old) = self.entries.remove(record_id) {
            for t in old.terms.keys() {
                if let Some(n) = self.doc_freq.get_mut(t) {
                    *n -= 1;
                    if *n == 0 {
                        self.doc_freq.remove(t);
                    }
                }
            }
        }
    }

    /// Score of a record is the sum over distinct query terms of
    /// `tf * ln(1 + N / df)`. Records scoring zero are left out; ties go to
    /// the smaller record id. `k == 0` returns nothing.
    pub fn search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        let terms: BTreeSet<String> = tokenize(query).into_iter().collect();
        let n = self.entries.len() as f64;
        let mut hits: Vec<SearchHit> = self
            .entries
            .values()
            .filter_map(|e| {
                let score: f64 = terms
                    .iter()
                    .filter_map(|t| {
                        let tf = *e.terms.get(t)? as f64;
                        let df = *self.doc_freq.get(t)? as f64;
                        Some(tf * (1.0 + n / df).ln())
                    })
                    .sum();
                (score > 0.0).then(|| SearchHit {
                    record_id: e.record_id.clone(),
                    score,
                })
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.record_id.cmp(&b.record_id))
        });
        hits.truncate(k);
        hits
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_tokens_kept() {
        assert_eq!(
            tokenize("Pt/TiO2-supported, CO oxidation"),
            ["pt", "tio2", "supported", "co", "oxidation"]
        );
    }

    #[test]
    fn sole_record_and_absent_term() {
        let mut idx = KeywordIndex::new();
        idx.upsert(IndexEntry::from_text("a", "ceria sintering"));
        idx.upsert(IndexEntry::from_text("b", "zeolite"));
        assert_eq!(idx.search("sintering", 5)[0].record_id, "a");
        assert!(idx.search("perovskite", 5).is_empty());
    }

    #[test]
    fn upsert_replaces_terms() {
        let mut idx = KeywordIndex::new();
        idx.upsert(IndexEntry::from_text("a", "old words"));
        idx.upsert(IndexEntry::from_text("a", "new words"));
        assert!(idx.search("old", 5).is_empty());
        assert_eq!(idx.len(), 1);
    }
}
