//! Ingestion pipeline: objects first, then the metadata row, then an index
//! event. The metadata write is the commit point; a failure before it
//! removes whatever objects were already written.

use std::collections::{BTreeMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Notify;

use super::index::{IndexEntry, KeywordIndex, SearchHit};
use super::metadata::MetadataRecord;
use super::package::DataPackage;
use crate::store::{ObjectRef, ObjectStore, StoreError};

pub const DATASET_PREFIX: &str = "datasets/";

#[derive(Debug, Error)]
pub enum KvError {
    #[error("kv write failed: {0}")]
    Write(String),
    #[error("kv value is not decodable: {0}")]
    Decode(String),
}

/// Metadata key/value store.
pub trait KvStore: Send + Sync {
    fn put(&self, key: &str, value: serde_json::Value) -> Result<(), KvError>;
    fn get(&self, key: &str) -> Option<serde_json::Value>;
    fn delete(&self, key: &str) -> Result<(), KvError>;
    fn keys(&self) -> Vec<String>;
}

#[derive(Debug, Default)]
pub struct MemoryKv {
    rows: RwLock<BTreeMap<String, serde_json::Value>>,
}

impl MemoryKv {
    pub fn new() -> Self {
        Self::default()
    }
}

impl KvStore for MemoryKv {
    fn put(&self, key: &str, value: serde_json::Value) -> Result<(), KvError> {
        self.rows
            .write()
            .expect("kv lock")
            .insert(key.to_string(), value);
        Ok(())
    }

    fn get(&self, key: &str) -> Option<serde_json::Value> {
        self.rows.read().expect("kv lock").get(key).cloned()
    }

    fn delete(&self, key: &str) -> Result<(), KvError> {
        self.rows.write().expect("kv lock").remove(key);
        Ok(())
    }

    fn keys(&self) -> Vec<String> {
        self.rows.read().expect("kv lock").keys().cloned().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredFile {
    pub name: String,
    pub object: ObjectRef,
}

/// Row written to the KV store for each ingested record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub metadata: MetadataRecord,
    pub files: Vec<StoredFile>,
    pub ingested_at: DateTime<Utc>,
    /// Monotone ingest counter; larger means more recent.
    pub ingest_seq: u64,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("object store: {0}")]
    Store(#[from] StoreError),
    #[error("metadata store: {0}")]
    Kv(#[from] KvError),
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("record {0:?} not found")]
    NoRecord(String),
    #[error("record {record:?} has no file {name:?}")]
    NoFile { record: String, name: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("stored bytes for {0:?} do not match their hash")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum IndexEvent {
    Upsert(String),
}

pub struct DataPlane {
    objects: Arc<dyn ObjectStore>,
    kv: Arc<dyn KvStore>,
    index: RwLock<KeywordIndex>,
    events: Mutex<VecDeque<IndexEvent>>,
    notify: Arc<Notify>,
    seq: AtomicU64,
    writer: Mutex<()>,
}

fn kv_key(id: &str) -> String {
    format!("record/{id}")
}

impl DataPlane {
    pub fn new(objects: Arc<dyn ObjectStore>, kv: Arc<dyn KvStore>) -> Self {
        let plane = Self {
            objects,
            kv,
            index: RwLock::new(KeywordIndex::new()),
            events: Mutex::new(VecDeque::new()),
            notify: Arc::new(Notify::new()),
            seq: AtomicU64::new(0),
            writer: Mutex::new(()),
        };
        // Rebuild from whatever the KV store already holds.
        let mut max_seq = 0;
        for rec in plane.records() {
            max_seq = max_seq.max(rec.ingest_seq);
            plane.enqueue(IndexEvent::Upsert(rec.metadata.id));
        }
        plane.seq.store(max_seq, Ordering::SeqCst);
        plane.process_index_events();
        plane
    }

    pub fn in_memory() -> Self {
        Self::new(
            Arc::new(crate::store::MemoryObjectStore::new()),
            Arc::new(MemoryKv::new()),
        )
    }

    pub fn objects(&self) -> &Arc<dyn ObjectStore> {
        &self.objects
    }

    fn enqueue(&self, event: IndexEvent) {
        self.events
            .lock()
            .expect("event queue lock")
            .push_back(event);
        self.notify.notify_one();
    }

    /// Writes the package and enqueues its index event. Re-ingesting an id
    /// replaces the earlier record once the new one commits.
    pub fn ingest_package(&self, package: &DataPackage) -> Result<String, IngestError> {
        let _writer = self.writer.lock().expect("writer lock");
        let id = package.metadata.id.clone();
        let seq = self.seq.fetch_add(1, Ordering::SeqCst) + 1;
        let prefix = format!("{DATASET_PREFIX}{id}/{seq}/");

        let mut written: Vec<StoredFile> = Vec::new();
        let rollback = |written: &[StoredFile]| {
            for f in written {
                if let Err(e) = self.objects.delete(&f.object.key) {
                    tracing::warn!("rollback could not delete {}: {e}", f.object.key);
                }
            }
        };
        for file in &package.files {
            match self
                .objects
                .put(&format!("{prefix}{}", file.name), &file.bytes)
            {
                Ok(object) => written.push(StoredFile {
                    name: file.name.clone(),
                    object,
                }),
                Err(e) => {
                    rollback(&written);
                    return Err(e.into());
                }
            }
        }

        let previous = self.record(&id);
        let row = StoredRecord {
            metadata: package.metadata.clone(),
            files: written.clone(),
            ingested_at: Utc::now(),
            ingest_seq: seq,
        };
        let value = serde_json::to_value(&row).map_err(|e| KvError::Write(e.to_string()))?;
        if let Err(e) = self.kv.put(&kv_key(&id), value) {
            rollback(&written);
            return Err(e.into());
        }
        if let Some(old) = previous {
            for f in &old.files {
                self.objects.delete(&f.object.key).ok();
            }
        }
        self.enqueue(IndexEvent::Upsert(id.clone()));
        tracing::info!(record = %id, files = written.len(), "ingested package");
        Ok(id)
    }

    /// Applies queued index events; returns how many were processed.
    pub fn process_index_events(&self) -> usize {
        let drained: Vec<IndexEvent> = self
            .events
            .lock()
            .expect("event queue lock")
            .drain(..)
            .collect();
        let mut index = self.index.write().expect("index lock");
        for event in &drained {
            let IndexEvent::Upsert(id) = event;
            match self.record(id) {
                Some(rec) => index.upsert(IndexEntry::from_text(id, &rec.metadata.index_text())),
                None => index.remove(id),
            }
        }
        drained.len()
    }

    /// Processes index events as they arrive until the plane is dropped.
    pub fn spawn_indexer(self: &Arc<Self>) -> tokio::task::JoinHandle<()> {
        let weak = Arc::downgrade(self);
        tokio::spawn(async move {
            loop {
                let Some(plane) = weak.upgrade() else { break };
                let notify = plane.notify.clone();
                let notified = notify.notified();
                plane.process_index_events();
                drop(plane);
                tokio::select! {
                    _ = notified => {}
                    _ = tokio::time::sleep(std::time::Duration::from_secs(1)) => {}
                }
            }
        })
    }

    pub fn pending_index_events(&self) -> usize {
        self.events.lock().expect("event queue lock").len()
    }

    pub fn keyword_search(&self, query: &str, k: usize) -> Vec<SearchHit> {
        self.index.read().expect("index lock").search(query, k)
    }

    pub fn record(&self, id: &str) -> Option<StoredRecord> {
        let value = self.kv.get(&kv_key(id))?;
        match serde_json::from_value(value) {
            Ok(r) => Some(r),
            Err(e) => {
                tracing::warn!(record = id, "undecodable metadata row: {e}");
                None
            }
        }
    }

    pub fn records(&self) -> Vec<StoredRecord> {
        self.kv
            .keys()
            .iter()
            .filter_map(|k| k.strip_prefix("record/"))
            .filter_map(|id| self.record(id))
            .collect()
    }

    /// Reads a payload file and checks it against its stored hash.
    pub fn read_file(&self, id: &str, name: &str) -> Result<Vec<u8>, ReadError> {
        let rec = self
            .record(id)
            .ok_or_else(|| ReadError::NoRecord(id.to_string()))?;
        let file = rec
            .files
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| ReadError::NoFile {
                record: id.to_string(),
                name: name.to_string(),
            })?;
        let bytes = self.objects.get(&file.object.key)?;
        if crate::store::sha256_hex(&bytes) != file.object.sha256 {
            return Err(ReadError::Integrity(file.object.key.clone()));
        }
        Ok(bytes)
    }

    /// Best match for `query`; among equal scores the most recently
    /// ingested record wins.
    pub fn find_dataset(&self, query: &str) -> Option<StoredRecord> {
        let hits = self.keyword_search(query, usize::MAX);
        let best = hits.first()?.score;
        hits.iter()
            .take_while(|h| h.score == best)
            .filter_map(|h| self.record(&h.record_id))
            .max_by_key(|r| r.ingest_seq)
    }
}
