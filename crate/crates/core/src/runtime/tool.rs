use std::collections::BTreeMap;
use std::sync::Arc;

use async_trait::async_trait;
use thiserror::Error;
use tokio::sync::Mutex;

use super::schema::{validate_args, NormalizedArgs, SchemaError, ToolSpec};
use crate::message::{Observation, ToolCall};
use crate::store::ArtifactRef;

#[derive(Debug, Clone)]
pub struct ToolContext {
    pub session_id: String,
    pub agent: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ToolOutput {
    pub text: String,
    pub artifacts: Vec<ArtifactRef>,
}

impl ToolOutput {
    pub fn text(text: impl Into<String>) -> Self {
        Self {
            text: text.into(),
            artifacts: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ToolError {
    #[error("{0}")]
    Failed(String),
    #[error("invalid arguments: {0}")]
    Args(#[from] SchemaError),
}

#[async_trait]
pub trait Tool: Send + Sync {
    /// Non-reentrant tools are serialized by the registry.
    fn reentrant(&self) -> bool {
        true
    }

    async fn call(&self, args: &NormalizedArgs, ctx: &ToolContext)
        -> Result<ToolOutput, ToolError>;
}

struct Registered {
    spec: ToolSpec,
    handler: Arc<dyn Tool>,
    serial: Option<Mutex<()>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum RegisterError {
    #[error("tool {0:?} already registered")]
    Duplicate(String),
    #[error(transparent)]
    Spec(#[from] SchemaError),
}

#[derive(Default)]
pub struct ToolRegistry {
    tools: BTreeMap<String, Registered>,
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        spec: ToolSpec,
        handler: Arc<dyn Tool>,
    ) -> Result<(), RegisterError> {
        spec.check()?;
        if self.tools.contains_key(&spec.name) {
            return Err(RegisterError::Duplicate(spec.name));
        }
        let serial = (!handler.reentrant()).then(|| Mutex::new(()));
        self.tools.insert(
            spec.name.clone(),
            Registered {
                spec,
                handler,
                serial,
            },
        );
        Ok(())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tools.contains_key(name)
    }

    pub fn spec(&self, name: &str) -> Option<&ToolSpec> {
        self.tools.get(name).map(|t| &t.spec)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tools.keys().map(String::as_str)
    }

    /// Runs one call. Every failure (unknown tool, bad arguments, tool
    /// error) becomes an error observation rather than an `Err`.
    pub async fn invoke(&self, call: &ToolCall, ctx: &ToolContext) -> Observation {
        let error = |payload: String| Observation {
            call_id: call.call_id.clone(),
            payload,
            artifacts: Vec::new(),
            is_error: true,
        };
        let Some(tool) = self.tools.get(&call.tool) else {
            return error(format!("error: unknown tool {:?}", call.tool));
        };
        let args = match validate_args(&tool.spec, &call.raw_args) {
            Ok(a) => a,
            Err(e) => return error(format!("error: invalid arguments for {}: {e}", call.tool)),
        };
        let _guard = match &tool.serial {
            Some(m) => Some(m.lock().await),
            None => None,
        };
        match tool.handler.call(&args, ctx).await {
            Ok(out) => Observation {
                call_id: call.call_id.clone(),
                payload: out.text,
                artifacts: out.artifacts,
                is_error: false,
            },
            Err(e) => error(format!("error: {e}")),
        }
    }
}
