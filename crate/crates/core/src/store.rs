//! File-backed, revisioned record store.
//!
//! Layout under the root directory:
//!
//! ```text
//! <root>/{cases,schemas,results}/<id>/<revision>.json
//! <root>/index.json
//! ```
//!
//! Every file is canonical JSON. Writes go to a temporary file and are then
//! renamed into place, so readers only ever see complete revisions.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::assess::AssessmentResult;
use crate::canonical::{canonicalize, to_canonical_string};
use crate::schema::{validate_schema, CriteriaSchema};
use crate::scoring::CaseFile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Case,
    Schema,
    Result,
}

impl RecordKind {
    pub const ALL: [RecordKind; 3] = [RecordKind::Case, RecordKind::Schema, RecordKind::Result];

    fn dir(self) -> &'static str {
        match self {
            RecordKind::Case => "cases",
            RecordKind::Schema => "schemas",
            RecordKind::Result => "results",
        }
    }
}

/// Which schema (and which stored revision of it) a record was made with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaRef {
    pub schema_id: String,
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub revision: Option<u64>,
}

impl SchemaRef {
    pub fn of(schema: &CriteriaSchema) -> Self {
        Self {
            schema_id: schema.schema_id.clone(),
            version: schema.version.clone(),
            revision: None,
        }
    }

    pub fn with_revision(mut self, revision: u64) -> Self {
        self.revision = Some(revision);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewRecord {
    pub kind: RecordKind,
    pub record_id: String,
    pub payload: Value,
    pub schema_ref: SchemaRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredRecord {
    pub record_id: String,
    pub kind: RecordKind,
    pub payload: Value,
    pub schema_ref: SchemaRef,
    pub revision: u64,
    pub saved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSummary {
    pub record_id: String,
    pub kind: RecordKind,
    pub latest_revision: u64,
    pub schema_ref: SchemaRef,
    pub saved_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListFilter {
    #[serde(default)]
    pub schema_id: Option<String>,
    #[serde(default)]
    pub id_prefix: Option<String>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{kind:?} record {record_id:?}{} not found", .revision.map(|r| format!(" revision {r}")).unwrap_or_default())]
    NotFound {
        kind: RecordKind,
        record_id: String,
        revision: Option<u64>,
    },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
    #[error("storage error: {0}")]
    Storage(#[from] io::Error),
    #[error("corrupt record file {path}: {source}")]
    Corrupt {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

fn invalid(field: &str, message: impl Into<String>) -> StoreError {
    StoreError::Validation {
        field: field.to_owned(),
        message: message.into(),
    }
}

pub struct CaseStore {
    root: PathBuf,
    write_guard: Mutex<()>,
}

impl CaseStore {
    /// Opens (creating if needed) a store rooted at `root`.
    pub fn open(root: impl AsRef<Path>) -> Result<Self, StoreError> {
        let root = root.as_ref().to_path_buf();
        for kind in RecordKind::ALL {
            fs::create_dir_all(root.join(kind.dir()))?;
        }
        let store = Self {
            root,
            write_guard: Mutex::new(()),
        };
        if !store.index_path().exists() {
            store.write_index(&[])?;
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn index_path(&self) -> PathBuf {
        self.root.join("index.json")
    }

    fn record_dir(&self, kind: RecordKind, record_id: &str) -> PathBuf {
        self.root.join(kind.dir()).join(record_id)
    }

    /// Validates and appends a new revision, returning its number (from 1).
    pub fn save(&self, record: NewRecord) -> Result<u64, StoreError> {
        check_record_id(&record.record_id)?;
        validate_payload(&record)?;

        let _guard = self.write_guard.lock().unwrap_or_else(|p| p.into_inner());
        let dir = self.record_dir(record.kind, &record.record_id);
        fs::create_dir_all(&dir)?;
        let revision = revisions_in(&dir)?.last().copied().unwrap_or(0) + 1;
        let stored = StoredRecord {
            record_id: record.record_id,
            kind: record.kind,
            payload: record.payload,
            schema_ref: record.schema_ref,
            revision,
            saved_at: Utc::now(),
        };
        let text = canonicalize(&stored).expect("record serializes");
        write_atomic(&dir.join(format!("{revision}.json")), &text)?;

        let mut index = self.read_index()?;
        index.retain(|s| !(s.kind == stored.kind && s.record_id == stored.record_id));
        index.push(RecordSummary {
            record_id: stored.record_id.clone(),
            kind: stored.kind,
            latest_revision: revision,
            schema_ref: stored.schema_ref.clone(),
            saved_at: stored.saved_at,
        });
        index.sort_by(|a, b| (a.kind, &a.record_id).cmp(&(b.kind, &b.record_id)));
        self.write_index(&index)?;
        Ok(revision)
    }

    /// Loads a specific revision, or the latest when `revision` is `None`.
    pub fn load(&self, kind: RecordKind, record_id: &str, revision: Option<u64>) -> Result<StoredRecord, StoreError> {
        let not_found = || StoreError::NotFound {
            kind,
            record_id: record_id.to_owned(),
            revision,
        };
        if check_record_id(record_id).is_err() {
            return Err(not_found());
        }
        let dir = self.record_dir(kind, record_id);
        if !dir.is_dir() {
            return Err(not_found());
        }
        let rev = match revision {
            Some(r) => r,
            None => *revisions_in(&dir)?.last().ok_or_else(not_found)?,
        };
        let path = dir.join(format!("{rev}.json"));
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(not_found()),
            Err(e) => return Err(e.into()),
        };
        serde_json::from_str(&text).map_err(|source| StoreError::Corrupt { path, source })
    }

    /// Latest revision summaries of one kind, most recently saved first.
    pub fn list(&self, kind: RecordKind, filter: &ListFilter) -> Result<Vec<RecordSummary>, StoreError> {
        let mut out: Vec<RecordSummary> = self
            .read_index()?
            .into_iter()
            .filter(|s| s.kind == kind)
            .filter(|s| filter.schema_id.as_ref().is_none_or(|id| &s.schema_ref.schema_id == id))
            .filter(|s| filter.id_prefix.as_ref().is_none_or(|p| s.record_id.starts_with(p.as_str())))
            .collect();
        out.sort_by(|a, b| b.saved_at.cmp(&a.saved_at).then_with(|| a.record_id.cmp(&b.record_id)));
        Ok(out)
    }

    pub fn save_case(&self, case: &CaseFile, schema_ref: SchemaRef) -> Result<u64, StoreError> {
        self.save(NewRecord {
            kind: RecordKind::Case,
            record_id: case.case_id.clone(),
            payload: serde_json::to_value(case).expect("case serializes"),
            schema_ref,
        })
    }

    pub fn save_schema(&self, schema: &CriteriaSchema) -> Result<u64, StoreError> {
        self.save(NewRecord {
            kind: RecordKind::Schema,
            record_id: schema.schema_id.clone(),
            payload: serde_json::to_value(schema).expect("schema serializes"),
            schema_ref: SchemaRef::of(schema),
        })
    }

    pub fn save_result(&self, record_id: &str, result: &AssessmentResult, schema_ref: SchemaRef) -> Result<u64, StoreError> {
        self.save(NewRecord {
            kind: RecordKind::Result,
            record_id: record_id.to_owned(),
            payload: serde_json::to_value(result).expect("result serializes"),
            schema_ref,
        })
    }

    pub fn load_case(&self, case_id: &str, revision: Option<u64>) -> Result<CaseFile, StoreError> {
        let record = self.load(RecordKind::Case, case_id, revision)?;
        serde_json::from_value(record.payload).map_err(|e| invalid("payload", e.to_string()))
    }

    fn read_index(&self) -> Result<Vec<RecordSummary>, StoreError> {
        let path = self.index_path();
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map_err(|source| StoreError::Corrupt { path, source }),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Vec::new()),
            Err(e) => Err(e.into()),
        }
    }

    fn write_index(&self, index: &[RecordSummary]) -> Result<(), StoreError> {
        write_atomic(&self.index_path(), &canonicalize(&index).expect("index serializes"))?;
        Ok(())
    }
}

fn check_record_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.len() <= 128
        && id.bytes().all(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b'.'));
    if ok {
        Ok(())
    } else {
        Err(invalid("record_id", format!("{id:?} must be 1-128 chars of [A-Za-z0-9._-]")))
    }
}

fn validate_payload(record: &NewRecord) -> Result<(), StoreError> {
    match record.kind {
        RecordKind::Case => {
            let case: CaseFile =
                serde_json::from_value(record.payload.clone()).map_err(|e| invalid("payload", e.to_string()))?;
            if case.case_id != record.record_id {
                return Err(invalid("case_id", "must equal the record id"));
            }
            case.validate().map_err(|e| invalid(&e.field().unwrap_or_default(), e.to_string()))
        }
        RecordKind::Schema => {
            let schema: CriteriaSchema =
                serde_json::from_value(record.payload.clone()).map_err(|e| invalid("payload", e.to_string()))?;
            if schema.schema_id != record.record_id {
                return Err(invalid("schema_id", "must equal the record id"));
            }
            match validate_schema(&schema).first() {
                Some(v) => Err(invalid(&v.field, v.message.clone())),
                None => Ok(()),
            }
        }
        RecordKind::Result => serde_json::from_value::<AssessmentResult>(record.payload.clone())
            .map(|_| ())
            .map_err(|e| invalid("payload", e.to_string())),
    }
}

fn revisions_in(dir: &Path) -> Result<Vec<u64>, StoreError> {
    let mut revs = Vec::new();
    for entry in fs::read_dir(dir)? {
        let name = entry?.file_name();
        let name = name.to_string_lossy();
        if let Some(rev) = name.strip_suffix(".json").and_then(|s| s.parse::<u64>().ok()) {
            revs.push(rev);
        }
    }
    revs.sort_unstable();
    Ok(revs)
}

fn write_atomic(path: &Path, text: &str) -> io::Result<()> {
    let file_name = path.file_name().expect("file path").to_string_lossy();
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)
}

/// Canonical text of a stored payload.
pub fn canonical_payload(record: &StoredRecord) -> String {
    to_canonical_string(&record.payload)
}
