//! Content-hashed object storage.
//!
//! Keys are `/`-separated relative paths. Dataset payloads live under
//! `datasets/<record>/`, job inputs under `inputs/`, downloadable artifacts
//! under `artifacts/<id>`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Component, Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ARTIFACT_PREFIX: &str = "artifacts/";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("object not found: {0}")]
    NotFound(String),
    #[error("invalid object key {0:?}")]
    InvalidKey(String),
    #[error("store write failed: {0}")]
    Write(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectRef {
    pub key: String,
    pub sha256: String,
    pub size: u64,
}

/// A downloadable artifact. `id` is the path segment served at
/// `/artifacts/{id}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub id: String,
    pub name: String,
    pub content_type: String,
    pub sha256: String,
    pub size: u64,
}

impl ArtifactRef {
    pub fn link(&self) -> String {
        format!("/artifacts/{}", self.id)
    }

    pub fn key(&self) -> String {
        format!("{ARTIFACT_PREFIX}{}", self.id)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn content_type_for(name: &str) -> &'static str {
    let ext = name.rsplit('.').next().unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "png" => "image/png",
        "csv" => "text/csv",
        "json" => "application/json",
        "txt" | "log" => "text/plain",
        "tar" => "application/x-tar",
        _ => "application/octet-stream",
    }
}

fn validate_key(key: &str) -> Result<(), StoreError> {
    let path = Path::new(key);
    let ok = !key.is_empty()
        && !key.ends_with('/')
        && path.components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(StoreError::InvalidKey(key.to_string()))
    }
}

pub trait ObjectStore: Send + Sync {
    fn put(&self, key: &str, bytes: &[u8]) -> Result<ObjectRef, StoreError>;
    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError>;
    fn delete(&self, key: &str) -> Result<(), StoreError>;
    /// Objects whose key starts with `prefix`, ordered by key.
    fn list(&self, prefix: &str) -> Result<Vec<ObjectRef>, StoreError>;

    fn exists(&self, key: &str) -> bool {
        self.get(key).is_ok()
    }
}

/// Stores `bytes` as a new artifact with a fresh id that keeps the file
/// extension of `name`.
pub fn put_artifact(
    store: &dyn ObjectStore,
    name: &str,
    bytes: &[u8],
) -> Result<ArtifactRef, StoreError> {
    let base = Path::new(name)
        .file_name()
        .and_then(|n| n.to_str())
        .unwrap_or("artifact");
    let ext = base.rsplit_once('.').map(|(_, e)| e).unwrap_or("bin");
    let id = format!("{}.{}", uuid::Uuid::new_v4().simple(), ext);
    let obj = store.put(&format!("{ARTIFACT_PREFIX}{id}"), bytes)?;
    Ok(ArtifactRef {
        id,
        name: base.to_string(),
        content_type: content_type_for(base).to_string(),
        sha256: obj.sha256,
        size: obj.size,
    })
}

/// Looks up an artifact by id. Ids never contain path separators.
pub fn get_artifact(
    store: &dyn ObjectStore,
    id: &str,
) -> Result<(Vec<u8>, &'static str), StoreError> {
    if id.contains('/') || id.contains("..") || id.is_empty() {
        return Err(StoreError::NotFound(id.to_string()));
    }
    let bytes = store.get(&format!("{ARTIFACT_PREFIX}{id}"))?;
    Ok((bytes, content_type_for(id)))
}

#[derive(Default)]
pub struct MemoryObjectStore {
    objects: RwLock<BTreeMap<String, Arc<Vec<u8>>>>,
}

impl MemoryObjectStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl ObjectStore for MemoryObjectStore {
    fn put(&self, key: &str, bytes: &[u8]) -> Result<ObjectRef, StoreError> {
        validate_key(key)?;
        self.objects
            .write()
            .expect("store lock")
            .insert(key.to_string(), Arc::new(bytes.to_vec()));
        Ok(ObjectRef {
            key: key.to_string(),
            sha256: sha256_hex(bytes),
            size: bytes.len() as u64,
        })
    }

    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError> {
        self.objects
            .read()
            .expect("store lock")
            .get(key)
            .map(|b| b.as_ref().clone())
            .ok_or_else(|| StoreError::NotFound(key.to_string()))
    }

    fn delete(&self, key: &str) -> Result<(), StoreError> {
        self.objects.write().expect("store lock").remove(key);
        Ok(())
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectRef>, StoreError> {
        Ok(self
            .objects
            .read()
            .expect("store lock")
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .map(|(k, v)| ObjectRef {
                key: k.clone(),
                sha256: sha256_hex(v),
                size: v.len() as u64,
            })
            .collect())
    }
}

/// Object store rooted at a local directory.
pub struct FsObjectStore {
    root: PathBuf,
}

impl FsObjectStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    fn path_for(&self, key: &str) -> Result<PathBuf, StoreError> {
        validate_key(key)?;
        Ok(self.root.join(key))
    }

    fn walk(&self, dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
        if !dir.is_dir() {
            return Ok(());
        }
        for entry in fs::read_dir(dir)? {
            let entry = entry?;
            let ft = entry.file_type()?;
            if ft.is_dir() {
                self.walk(&entry.path(), out)?;
            } else if ft.is_file() {
                out.push(entry.path());
            }
        }
        Ok(())
    }
}

impl ObjectStore for FsObjectStore {
    fn put(&self, key: &str, bytes: &[u8]) -> Result<ObjectRef, StoreError> {
        let path = self.path_for(key)?;
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        // Write-then-rename so readers never see a torn object.
        let tmp = path.with_extension(format!("tmp-{}", uuid::Uuid::new_v4().simple()));
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        Ok(ObjectRef {
            key: key.to_string(),
            sha256: sha256_hex(bytes),
            size: bytes.len() as u64,
        })
    }

    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError> {
        let path = self
            .path_for(key)
            .map_err(|_| StoreError::NotFound(key.to_string()))?;
        match fs::read(&path) {
            Ok(b) => Ok(b),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(StoreError::NotFound(key.to_string()))
            }
            Err(e) => Err(e.into()),
        }
    }

    fn delete(&self, key: &str) -> Result<(), StoreError> {
        let path = self.path_for(key)?;
        match fs::remove_file(path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(()),
            Err(e) => Err(e.into()),
        }
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectRef>, StoreError> {
        let mut files = Vec::new();
        self.walk(&self.root, &mut files)?;
        let mut out = Vec::new();
        for path in files {
            let rel = path.strip_prefix(&self.root).expect("walked under root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if key.starts_with(prefix) && !key.contains(".tmp-") {
                let bytes = fs::read(&path)?;
                out.push(ObjectRef {
                    key,
                    sha256: sha256_hex(&bytes),
                    size: bytes.len() as u64,
                });
            }
        }
        out.sort_by(|a, b| a.key.cmp(&b.key));
        Ok(out)
    }
}

/// Fault-injection wrapper: the `n`-th `put` (0-based) and every later one
/// fails until [`FlakyStore::heal`] is called.
pub struct FlakyStore<S> {
    inner: S,
    fail_from: AtomicUsize,
    puts: AtomicUsize,
}

impl<S: ObjectStore> FlakyStore<S> {
    pub fn new(inner: S, fail_from_put: usize) -> Self {
        Self {
            inner,
            fail_from: AtomicUsize::new(fail_from_put),
            puts: AtomicUsize::new(0),
        }
    }

    pub fn heal(&self) {
        self.fail_from.store(usize::MAX, Ordering::SeqCst);
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }
}

impl<S: ObjectStore> ObjectStore for FlakyStore<S> {
    fn put(&self, key: &str, bytes: &[u8]) -> Result<ObjectRef, StoreError> {
        let n = self.puts.fetch_add(1, Ordering::SeqCst);
        if n >= self.fail_from.load(Ordering::SeqCst) {
            return Err(StoreError::Write(format!("injected failure writing {key}")));
        }
        self.inner.put(key, bytes)
    }

    fn get(&self, key: &str) -> Result<Vec<u8>, StoreError> {
        self.inner.get(key)
    }

    fn delete(&self, key: &str) -> Result<(), StoreError> {
        self.inner.delete(key)
    }

    fn list(&self, prefix: &str) -> Result<Vec<ObjectRef>, StoreError> {
        self.inner.list(prefix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exercise(store: &dyn ObjectStore) {
        let r = store.put("datasets/r1/data.csv", b"a,b\n1,2\n").unwrap();
        assert_eq!(r.size, 8);
        let bytes = store.get("datasets/r1/data.csv").unwrap();
        assert_eq!(sha256_hex(&bytes), r.sha256);
        store.put("datasets/r2/x.csv", b"x").unwrap();
        store.put("inputs/scene.json", b"{}").unwrap();
        let keys: Vec<_> = store
            .list("datasets/")
            .unwrap()
            .into_iter()
            .map(|o| o.key)
            .collect();
        assert_eq!(keys, vec!["datasets/r1/data.csv", "datasets/r2/x.csv"]);
        store.delete("datasets/r2/x.csv").unwrap();
        assert!(matches!(
            store.get("datasets/r2/x.csv"),
            Err(StoreError::NotFound(_))
        ));
        assert!(matches!(
            store.put("../escape", b""),
            Err(StoreError::InvalidKey(_))
        ));
        assert!(matches!(
            store.put("/abs", b""),
            Err(StoreError::InvalidKey(_))
        ));
    }

    #[test]
    fn memory_store_contract() {
        exercise(&MemoryObjectStore::new());
    }

    #[test]
    fn fs_store_contract() {
        let dir = tempfile::tempdir().unwrap();
        exercise(&FsObjectStore::open(dir.path()).unwrap());
    }

    #[test]
    fn artifacts_round_trip_by_id() {
        let store = MemoryObjectStore::new();
        let a = put_artifact(&store, "plots/size.png", b"\x89PNG").unwrap();
        assert!(a.id.ends_with(".png"));
        assert_eq!(a.name, "size.png");
        assert_eq!(a.link(), format!("/artifacts/{}", a.id));
        let (bytes, ct) = get_artifact(&store, &a.id).unwrap();
        assert_eq!(sha256_hex(&bytes), a.sha256);
        assert_eq!(ct, "image/png");
        assert!(get_artifact(&store, "../datasets").is_err());
    }

    #[test]
    fn flaky_store_fails_from_nth_put() {
        let s = FlakyStore::new(MemoryObjectStore::new(), 1);
        assert!(s.put("a", b"1").is_ok());
        assert!(s.put("b", b"2").is_err());
        s.heal();
        assert!(s.put("c", b"3").is_ok());
    }
}
