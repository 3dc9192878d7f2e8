use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::GraphState;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CheckpointToken {
    pub token: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CheckpointError {
    #[error("checkpoint {0:?} not found")]
    NotFound(String),
}

/// In-process snapshots; nothing survives a restart.
#[derive(Debug, Default)]
pub struct CheckpointStore {
    saved: Mutex<HashMap<String, GraphState>>,
}

impl CheckpointStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn save(&self, state: &GraphState) -> CheckpointToken {
        let token = CheckpointToken {
            token: uuid::Uuid::new_v4().to_string(),
            created_at: Utc::now(),
        };
        self.saved
            .lock()
            .expect("checkpoint lock")
            .insert(token.token.clone(), state.clone());
        token
    }

    pub fn restore(&self, token: &str) -> Result<GraphState, CheckpointError> {
        self.saved
            .lock()
            .expect("checkpoint lock")
            .get(token)
            .cloned()
            .ok_or_else(|| CheckpointError::NotFound(token.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::Message;

    #[test]
    fn two_saves_distinct_tokens_equal_states() {
        let store = CheckpointStore::new();
        let mut s = GraphState::new("s1");
        s.transcript.push(Message::user("a"));
        let a = store.save(&s);
        let b = store.save(&s);
        assert_ne!(a.token, b.token);
        assert_eq!(
            store.restore(&a.token).unwrap(),
            store.restore(&b.token).unwrap()
        );
    }

    #[test]
    fn garbage_not_found() {
        assert_eq!(
            CheckpointStore::new().restore("garbage"),
            Err(CheckpointError::NotFound("garbage".into()))
        );
    }
}
