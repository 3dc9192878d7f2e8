//! Dataset metadata schema. Every field except `id` may be absent or null,
//! and unknown fields are carried through unchanged.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConditions {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub catalyst_composition: Option<String>,
    /// Metal loading in wt%.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metal_loading: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthesis_method: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uploader: Option<String>,
    /// RFC 3339 timestamp as supplied by the uploader.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetadataRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conditions: Option<ExperimentConditions>,
    /// Characterization techniques, e.g. DRIFTS, XAS, TEM.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub characterization: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degradation_mechanisms: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

fn push_strings(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::String(s) => out.push(s.clone()),
        Value::Array(items) => items.iter().for_each(|i| push_strings(i, out)),
        Value::Object(map) => map.values().for_each(|i| push_strings(i, out)),
        _ => {}
    }
}

impl MetadataRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            ..Default::default()
        }
    }

    /// True when no field besides `id` carries a value.
    pub fn is_bare(&self) -> bool {
        *self == MetadataRecord::new(self.id.clone())
    }

    /// The metadata text that the keyword index sees.
    pub fn index_text(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        parts.extend(self.title.clone());
        parts.extend(self.description.clone());
        if let Some(c) = &self.conditions {
            parts.extend(c.catalyst_composition.clone());
            parts.extend(c.synthesis_method.clone());
            c.extra.values().for_each(|v| push_strings(v, &mut parts));
        }
        parts.extend(self.characterization.iter().flatten().cloned());
        parts.extend(self.degradation_mechanisms.iter().flatten().cloned());
        if let Some(p) = &self.provenance {
            parts.extend(p.uploader.clone());
        }
        self.extra
            .values()
            .for_each(|v| push_strings(v, &mut parts));
        parts.join(" ")
    }
}
