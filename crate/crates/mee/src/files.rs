//! JSON and JSON Lines readers and writers for every on-disk format.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use mee_core::schema::{MappingEntry, RoleMapping, RoleMappingEntry, SchemaMapping};
use mee_core::EventSchema;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
#[error("{}{}: {message}", path.display(), line.map(|l| format!(":{l}")).unwrap_or_default())]
pub struct FileError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub message: String,
}

impl FileError {
    fn new(path: &Path, line: Option<usize>, message: impl ToString) -> Self {
        Self {
            path: path.to_path_buf(),
            line,
            message: message.to_string(),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|e| FileError::new(path, None, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FileError> {
    serde_json::from_str(&read_text(path)?).map_err(|e| FileError::new(path, None, e))
}

/// One value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FileError> {
    let file = File::open(path).map_err(|e| FileError::new(path, None, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FileError::new(path, Some(i + 1), e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| FileError::new(path, Some(i + 1), e))?);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<BufWriter<File>, FileError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FileError::new(dir, None, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| FileError::new(path, None, e))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<usize, FileError> {
    let mut w = create(path)?;
    let mut n = 0;
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| FileError::new(path, None, e))?;
        w.write_all(b"\n").map_err(|e| FileError::new(path, None, e))?;
        n += 1;
    }
    w.flush().map_err(|e| FileError::new(path, None, e))?;
    Ok(n)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FileError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| FileError::new(path, None, e))?;
    w.write_all(b"\n").map_err(|e| FileError::new(path, None, e))?;
    w.flush().map_err(|e| FileError::new(path, None, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// A schema file together with the digest of its bytes.
pub struct LoadedSchema {
    pub schema: EventSchema,
    pub sha256: String,
}

/// `{ "types": [ { "id", "definition", "roles": [ { "name", "definition" } ] } ] }`
pub fn load_schema(path: &Path) -> Result<LoadedSchema, FileError> {
    let bytes = fs::read(path).map_err(|e| FileError::new(path, None, e))?;
    let schema = serde_json::from_slice(&bytes).map_err(|e| FileError::new(path, None, e))?;
    Ok(LoadedSchema {
        schema,
        sha256: sha256_hex(&bytes),
    })
}

/// Source-label and role reconciliation tables, validated against a schema.
///
/// ```json
/// { "sources": { "sentences": "ace", "images": "swig" },
///   "types": [ { "source": "ace", "label": "Attack", "target": "Conflict.Attack" } ],
///   "roles": [ { "source": "swig", "event_type": "Conflict.Attack", "role": "tool", "target": "Instrument" } ] }
/// ```
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingFile {
    #[serde(default)]
    pub sources: mee_core::dataset::SourceTags,
    #[serde(default)]
    pub types: Vec<MappingEntry>,
    #[serde(default)]
    pub roles: Vec<RoleMappingEntry>,
}

pub struct LoadedMapping {
    pub tags: mee_core::dataset::SourceTags,
    pub types: SchemaMapping,
    pub roles: RoleMapping,
}

impl MappingFile {
    pub fn validate(self, schema: &EventSchema) -> Result<LoadedMapping, mee_core::SchemaError> {
        Ok(LoadedMapping {
            tags: self.sources,
            types: SchemaMapping::new(self.types, schema)?,
            roles: RoleMapping::new(self.roles, schema)?,
        })
    }
}

pub fn load_mapping(path: &Path, schema: &EventSchema) -> Result<LoadedMapping, FileError> {
    read_json::<MappingFile>(path)?
        .validate(schema)
        .map_err(|e| FileError::new(path, None, e))
}
