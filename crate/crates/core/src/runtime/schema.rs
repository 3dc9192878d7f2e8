//! Declarative tool argument schemas and argument validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArgType {
    String,
    Integer,
    Number,
    Boolean,
}

impl fmt::Display for ArgType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArgType::String => "string",
            ArgType::Integer => "integer",
            ArgType::Number => "number",
            ArgType::Boolean => "boolean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgField {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: ArgType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
    /// Default as text; coerced with the same rules as model-supplied values.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<String>,
    #[serde(default)]
    pub description: String,
    /// Optional fields without a default are simply absent when omitted.
    #[serde(default)]
    pub optional: bool,
}

impl ArgField {
    pub fn new(name: &str, kind: ArgType, description: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            units: None,
            default: None,
            description: description.to_string(),
            optional: false,
        }
    }

    pub fn units(mut self, units: &str) -> Self {
        self.units = Some(units.to_string());
        self
    }

    pub fn default_value(mut self, value: &str) -> Self {
        self.default = Some(value.to_string());
        self
    }

    pub fn optional(mut self) -> Self {
        self.optional = true;
        self
    }

    pub fn is_required(&self) -> bool {
        self.default.is_none() && !self.optional
    }
}

/// A tool as the model sees it: doc text plus argument schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub args: Vec<ArgField>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemaError {
    #[error("unknown field {0:?}")]
    UnknownField(String),
    #[error("missing required field {0:?}")]
    MissingField(String),
    #[error("field {field:?}: cannot read {value:?} as {expected}")]
    Uncoercible {
        field: String,
        value: String,
        expected: ArgType,
    },
    #[error("invalid tool spec {tool:?}: {reason}")]
    InvalidSpec { tool: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ArgScalar {
    Boolean(bool),
    Integer(i64),
    Number(f64),
    Text(String),
}

impl fmt::Display for ArgScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArgScalar::Boolean(b) => write!(f, "{b}"),
            ArgScalar::Integer(i) => write!(f, "{i}"),
            ArgScalar::Number(x) => write!(f, "{x}"),
            ArgScalar::Text(s) => f.write_str(s),
        }
    }
}

/// A validated argument value with the unit its schema declares.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArgValue {
    pub value: ArgScalar,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NormalizedArgs(pub BTreeMap<String, ArgValue>);

impl NormalizedArgs {
    pub fn get(&self, name: &str) -> Option<&ArgValue> {
        self.0.get(name)
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match &self.0.get(name)?.value {
            ArgScalar::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn number(&self, name: &str) -> Option<f64> {
        match self.0.get(name)?.value {
            ArgScalar::Number(x) => Some(x),
            ArgScalar::Integer(i) => Some(i as f64),
            _ => None,
        }
    }

    pub fn integer(&self, name: &str) -> Option<i64> {
        match self.0.get(name)?.value {
            ArgScalar::Integer(i) => Some(i),
            _ => None,
        }
    }

    pub fn boolean(&self, name: &str) -> Option<bool> {
        match self.0.get(name)?.value {
            ArgScalar::Boolean(b) => Some(b),
            _ => None,
        }
    }

    /// Back to the text form a model would send.
    pub fn to_raw(&self) -> BTreeMap<String, String> {
        self.0
            .iter()
            .map(|(k, v)| (k.clone(), v.value.to_string()))
            .collect()
    }
}

fn coerce(field: &ArgField, raw: &str) -> Result<ArgScalar, SchemaError> {
    let bad = || SchemaError::Uncoercible {
        field: field.name.clone(),
        value: raw.to_string(),
        expected: field.kind,
    };
    let trimmed = raw.trim();
    match field.kind {
        ArgType::String => Ok(ArgScalar::Text(raw.to_string())),
        ArgType::Integer => trimmed
            .parse::<i64>()
            .map(ArgScalar::Integer)
            .map_err(|_| bad()),
        ArgType::Number => match trimmed.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(ArgScalar::Number(x)),
            _ => Err(bad()),
        },
        ArgType::Boolean => match trimmed.to_ascii_lowercase().as_str() {
            "true" => Ok(ArgScalar::Boolean(true)),
            "false" => Ok(ArgScalar::Boolean(false)),
            _ => Err(bad()),
        },
    }
}

impl ToolSpec {
    pub fn new(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            args: Vec::new(),
        }
    }

    pub fn arg(mut self, field: ArgField) -> Self {
        self.args.push(field);
        self
    }

    pub fn field(&self, name: &str) -> Option<&ArgField> {
        self.args.iter().find(|f| f.name == name)
    }

    /// Argument names are unique and every default coerces to its field type.
    pub fn check(&self) -> Result<(), SchemaError> {
        let invalid = |reason: String| SchemaError::InvalidSpec {
            tool: self.name.clone(),
            reason,
        };
        if self.name.trim().is_empty() {
            return Err(invalid("empty tool name".into()));
        }
        let mut seen = HashSet::new();
        for f in &self.args {
            if !seen.insert(f.name.as_str()) {
                return Err(invalid(format!("duplicate argument {:?}", f.name)));
            }
            if let Some(d) = &f.default {
                coerce(f, d).map_err(|e| invalid(format!("bad default: {e}")))?;
            }
        }
        Ok(())
    }

    /// Description shown to the model: the tool's doc text followed by one
    /// line per argument.
    pub fn model_description(&self) -> String {
        let mut out = self.description.trim().to_string();
        if !self.args.is_empty() {
            out.push_str("\n\nArguments:");
            for f in &self.args {
                out.push_str(&format!("\n- {} ({}", f.name, f.kind));
                if let Some(u) = &f.units {
                    out.push_str(&format!(", in {u}"));
                }
                if let Some(d) = &f.default {
                    out.push_str(&format!(", default {d}"));
                } else if f.optional {
                    out.push_str(", optional");
                }
                out.push_str(&format!("): {}", f.description));
            }
        }
        out
    }

    /// JSON schema for the argument object, as sent to chat-completions
    /// backends.
    pub fn json_schema(&self) -> serde_json::Value {
        let mut props = serde_json::Map::new();
        let mut required = Vec::new();
        for f in &self.args {
            let mut desc = f.description.clone();
            if let Some(u) = &f.units {
                desc.push_str(&format!(" (units: {u})"));
            }
            props.insert(
                f.name.clone(),
                serde_json::json!({ "type": f.kind.to_string(), "description": desc }),
            );
            if f.is_required() {
                required.push(serde_json::Value::String(f.name.clone()));
            }
        }
        serde_json::json!({ "type": "object", "properties": props, "required": required })
    }
}

/// Validates model-supplied text arguments against `spec`.
///
/// Defaults fill omitted fields, numeric text becomes numbers, and each value
/// carries the schema's declared unit. Units are recorded, never converted.
pub fn validate_args(
    spec: &ToolSpec,
    raw: &BTreeMap<String, String>,
) -> Result<NormalizedArgs, SchemaError> {
    if let Some(unknown) = raw.keys().find(|k| spec.field(k).is_none()) {
        return Err(SchemaError::UnknownField(unknown.clone()));
    }
    let mut out = BTreeMap::new();
    for field in &spec.args {
        let text = match (raw.get(&field.name), &field.default) {
            (Some(v), _) => v,
            (None, Some(d)) => d,
            (None, None) if field.optional => continue,
            (None, None) => return Err(SchemaError::MissingField(field.name.clone())),
        };
        out.insert(
            field.name.clone(),
            ArgValue {
                value: coerce(field, text)?,
                units: field.units.clone(),
            },
        );
    }
    Ok(NormalizedArgs(out))
}
