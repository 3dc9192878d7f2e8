//! Scheduled crawl of a drop folder or mounted share. Every direct child
//! that is a directory or a `.tar` file is treated as one package.

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use super::package::{validate_package, RawPackage};
use super::plane::DataPlane;

pub struct Crawler {
    root: PathBuf,
    plane: Arc<DataPlane>,
    seen: Mutex<HashSet<String>>,
}

impl Crawler {
    pub fn new(root: impl Into<PathBuf>, plane: Arc<DataPlane>) -> Self {
        Self {
            root: root.into(),
            plane,
            seen: Mutex::new(HashSet::new()),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// One crawl pass. Returns ids ingested during this pass, in path order.
    pub fn tick(&self) -> Vec<String> {
        let mut entries: Vec<PathBuf> = match std::fs::read_dir(&self.root) {
            Ok(rd) => rd.filter_map(|e| e.ok()).map(|e| e.path()).collect(),
            Err(e) => {
                tracing::warn!(root = %self.root.display(), "crawl root unreadable: {e}");
                return Vec::new();
            }
        };
        entries.sort();
        let mut ingested = Vec::new();
        for path in entries {
            let is_tar = path.extension().is_some_and(|x| x == "tar");
            if !(path.is_dir() || (is_tar && path.is_file())) {
                continue;
            }
            let raw = match RawPackage::load(&path) {
                Ok(r) => r,
                Err(e) => {
                    tracing::warn!(entry = %path.display(), "skipping unreadable entry: {e}");
                    continue;
                }
            };
            let hash = raw.content_hash();
            if self.seen.lock().expect("seen lock").contains(&hash) {
                continue;
            }
            let package = match validate_package(&raw) {
                Ok(p) => p,
                Err(errors) => {
                    let msgs: Vec<String> = errors.iter().map(ToString::to_string).collect();
                    tracing::warn!(entry = %path.display(), "skipping invalid package: {}", msgs.join("; "));
                    self.seen.lock().expect("seen lock").insert(hash);
                    continue;
                }
            };
            match self.plane.ingest_package(&package) {
                Ok(id) => {
                    self.seen.lock().expect("seen lock").insert(hash);
                    ingested.push(id);
                }
                // not marked seen, so the next pass retries
                Err(e) => tracing::warn!(entry = %path.display(), "ingest failed: {e}"),
            }
        }
        ingested
    }

    /// Ticks every `interval` until the crawler is dropped.
    pub fn spawn(self: &Arc<Self>, interval: Duration) -> tokio::task::JoinHandle<()> {
        let weak = Arc::downgrade(self);
        tokio::spawn(async move {
            let mut ticker = tokio::time::interval(interval);
            loop {
                ticker.tick().await;
                let Some(crawler) = weak.upgrade() else { break };
                let ids = tokio::task::spawn_blocking(move || crawler.tick())
                    .await
                    .unwrap_or_default();
                if !ids.is_empty() {
                    tracing::info!(count = ids.len(), "crawler ingested packages");
                }
            }
        })
    }
}
