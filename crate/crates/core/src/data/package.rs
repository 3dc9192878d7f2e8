//! Data packages: one `metadata.json` plus payload files, shipped as a
//! directory or a tar archive.

use std::path::{Component, Path};

use serde_json::Value;
use thiserror::Error;

use super::metadata::MetadataRecord;
use crate::store::sha256_hex;

pub const METADATA_FILE: &str = "metadata.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Unvalidated container contents.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawPackage {
    pub metadata: Option<Vec<u8>>,
    pub files: Vec<PayloadFile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPackage {
    pub metadata: MetadataRecord,
    pub files: Vec<PayloadFile>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("container is corrupt: {0}")]
    Corrupt(String),
    #[error("package has no {METADATA_FILE}")]
    MissingMetadata,
    #[error("metadata is not valid JSON: {0}")]
    Json(String),
    #[error("metadata has no record id")]
    MissingId,
    #[error("record id {0:?} must be a single path segment")]
    InvalidId(String),
    #[error("field {path}: {message}")]
    Field { path: String, message: String },
    #[error("payload name {0:?} is not a safe relative path")]
    InvalidFileName(String),
    #[error("duplicate payload file {0:?}")]
    DuplicateFile(String),
    #[error("package has neither payload files nor metadata beyond the id")]
    Empty,
}

fn safe_relative(name: &str) -> bool {
    !name.is_empty()
        && !name.ends_with('/')
        && Path::new(name)
            .components()
            .all(|c| matches!(c, Component::Normal(_)))
}

fn valid_id(id: &str) -> bool {
    !id.trim().is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0'])
}

impl RawPackage {
    /// Reads a package directory recursively. Symlinks are ignored.
    pub fn from_dir(root: &Path) -> std::io::Result<Self> {
        let mut pkg = RawPackage::default();
        let mut stack = vec![root.to_path_buf()];
        while let Some(dir) = stack.pop() {
            for entry in std::fs::read_dir(&dir)? {
                let entry = entry?;
                let ft = entry.file_type()?;
                let path = entry.path();
                if ft.is_dir() {
                    stack.push(path);
                } else if ft.is_file() {
                    let rel = path
                        .strip_prefix(root)
                        .map_err(|e| std::io::Error::other(e.to_string()))?
                        .to_string_lossy()
                        .replace('\\', "/");
                    let bytes = std::fs::read(&path)?;
                    pkg.add(rel, bytes);
                }
            }
        }
        pkg.files.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(pkg)
    }

    /// Reads a tar archive. Directory and link entries are ignored.
    pub fn from_tar(bytes: &[u8]) -> Result<Self, ValidationError> {
        let corrupt = |e: std::io::Error| ValidationError::Corrupt(e.to_string());
        let mut archive = tar::Archive::new(bytes);
        let mut pkg = RawPackage::default();
        for entry in archive.entries().map_err(corrupt)? {
            let mut entry = entry.map_err(corrupt)?;
            if !entry.header().entry_type().is_file() {
                continue;
            }
            let name = entry
                .path()
                .map_err(corrupt)?
                .to_string_lossy()
                .into_owned();
            let name = name.trim_start_matches("./").to_string();
            let mut data = Vec::new();
            std::io::Read::read_to_end(&mut entry, &mut data).map_err(corrupt)?;
            pkg.add(name, data);
        }
        pkg.files.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(pkg)
    }

    /// Loads a directory or a `.tar` file.
    pub fn load(path: &Path) -> Result<Self, ValidationError> {
        let io = |e: std::io::Error| ValidationError::Corrupt(format!("{}: {e}", path.display()));
        if path.is_dir() {
            RawPackage::from_dir(path).map_err(io)
        } else {
            RawPackage::from_tar(&std::fs::read(path).map_err(io)?)
        }
    }

    fn add(&mut self, name: String, bytes: Vec<u8>) {
        if name == METADATA_FILE {
            self.metadata = Some(bytes);
        } else {
            self.files.push(PayloadFile { name, bytes });
        }
    }

    /// Hash over sorted (name, bytes) pairs including the metadata file, so
    /// the same content under another container name hashes the same.
    pub fn content_hash(&self) -> String {
        let mut entries: Vec<(&str, &[u8])> = self
            .files
            .iter()
            .map(|f| (f.name.as_str(), f.bytes.as_slice()))
            .collect();
        if let Some(m) = &self.metadata {
            entries.push((METADATA_FILE, m));
        }
        entries.sort();
        let mut buf = Vec::new();
        for (name, bytes) in entries {
            buf.extend_from_slice(&(name.len() as u64).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            buf.extend_from_slice(bytes);
        }
        sha256_hex(&buf)
    }
}

/// Parses the metadata document and checks package-level invariants.
/// All problems found are reported together.
pub fn validate_package(raw: &RawPackage) -> Result<DataPackage, Vec<ValidationError>> {
    let mut errors = Vec::new();
    let Some(bytes) = &raw.metadata else {
        return Err(vec![ValidationError::MissingMetadata]);
    };
    let doc: Value = match serde_json::from_slice(bytes) {
        Ok(v) => v,
        Err(e) => return Err(vec![ValidationError::Json(e.to_string())]),
    };
    match doc.get("id") {
        None | Some(Value::Null) => return Err(vec![ValidationError::MissingId]),
        Some(Value::String(id)) if !valid_id(id) => {
            errors.push(ValidationError::InvalidId(id.clone()))
        }
        _ => {}
    }
    let metadata: Option<MetadataRecord> = match serde_path_to_error::deserialize(doc) {
        Ok(m) => Some(m),
        Err(e) => {
            errors.push(ValidationError::Field {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            });
            None
        }
    };
    let mut seen = std::collections::BTreeSet::new();
    for f in &raw.files {
        if !safe_relative(&f.name) {
            errors.push(ValidationError::InvalidFileName(f.name.clone()));
        } else if !seen.insert(f.name.as_str()) {
            errors.push(ValidationError::DuplicateFile(f.name.clone()));
        }
    }
    if let Some(m) = &metadata {
        if raw.files.is_empty() && m.is_bare() {
            errors.push(ValidationError::Empty);
        }
    }
    match metadata {
        Some(metadata) if errors.is_empty() => Ok(DataPackage {
            metadata,
            files: raw.files.clone(),
        }),
        _ => Err(errors),
    }
}
