//! Dataset intake, storage and keyword search.

pub mod crawl;
pub mod index;
pub mod metadata;
pub mod package;
pub mod plane;

pub use crawl::Crawler;
pub use index::{tokenize, IndexEntry, KeywordIndex, SearchHit};
pub use metadata::{ExperimentConditions, MetadataRecord, Provenance};
pub use package::{validate_package, DataPackage, PayloadFile, RawPackage, ValidationError};
pub use plane::{DataPlane, IngestError, KvError, KvStore, MemoryKv, StoredRecord};
