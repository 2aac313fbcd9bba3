//! Portable archive: a zip whose first entry is `manifest.json`, followed by
//! one canonical line-delimited file per store.
//!
//! Import verifies the format version, per-file SHA-256 checksums, record
//! counts and the state digest before handing back a store.

use std::collections::{BTreeMap, HashMap};
use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use zip::write::SimpleFileOptions;
use zip::{CompressionMethod, ZipArchive, ZipWriter};

use crate::config::EngineConfig;
use crate::error::{MemoryError, Result};
use crate::substrate::{RecordCounts, StoreState};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub record_counts: RecordCounts,
    pub config: EngineConfig,
    pub next_seq: u64,
    /// File name → lowercase hex SHA-256 of its content.
    pub checksums: BTreeMap<String, String>,
    pub state_digest: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn corrupt(why: impl std::fmt::Display) -> MemoryError {
    MemoryError::ArchiveCorrupt(why.to_string())
}

pub fn manifest_for(state: &StoreState) -> Manifest {
    Manifest {
        format_version: FORMAT_VERSION,
        record_counts: state.counts(),
        config: state.config().clone(),
        next_seq: state.next_seq(),
        checksums: state
            .canonical_files()
            .into_iter()
            .map(|(name, content)| (name.to_string(), sha256_hex(content.as_bytes())))
            .collect(),
        state_digest: state.state_digest(),
    }
}

/// Serializes the store into archive bytes. Output is deterministic.
pub fn export_bytes(state: &StoreState) -> Result<Vec<u8>> {
    let manifest = manifest_for(state);
    let options = SimpleFileOptions::default()
        .compression_method(CompressionMethod::Deflated)
        .last_modified_time(zip::DateTime::default());
    let mut zip = ZipWriter::new(Cursor::new(Vec::new()));
    let manifest_json = serde_json::to_string_pretty(&manifest).map_err(corrupt)?;
    zip.start_file(MANIFEST_FILE, options).map_err(zip_err)?;
    zip.write_all(manifest_json.as_bytes())?;
    for (name, content) in state.canonical_files() {
        zip.start_file(name, options).map_err(zip_err)?;
        zip.write_all(content.as_bytes())?;
    }
    Ok(zip.finish().map_err(zip_err)?.into_inner())
}

fn zip_err(e: zip::result::ZipError) -> MemoryError {
    match e {
        zip::result::ZipError::Io(io) => MemoryError::Io(io),
        other => corrupt(other),
    }
}

/// Reads and checks the manifest only.
pub fn read_manifest(bytes: &[u8]) -> Result<Manifest> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(corrupt)?;
    read_manifest_from(&mut zip)
}

fn read_entry(zip: &mut ZipArchive<Cursor<&[u8]>>, index: usize) -> Result<(String, Vec<u8>)> {
    let mut f = zip.by_index(index).map_err(corrupt)?;
    let name = f.name().to_string();
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(corrupt)?;
    Ok((name, buf))
}

fn read_manifest_from(zip: &mut ZipArchive<Cursor<&[u8]>>) -> Result<Manifest> {
    if zip.is_empty() {
        return Err(corrupt("archive is empty"));
    }
    let (name, bytes) = read_entry(zip, 0)?;
    if name != MANIFEST_FILE {
        return Err(corrupt(format!("first entry is `{name}`, expected {MANIFEST_FILE}")));
    }
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| corrupt(format!("manifest: {e}")))?;
    let found = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| corrupt("manifest has no format_version"))?;
    if found != u64::from(FORMAT_VERSION) {
        return Err(MemoryError::VersionMismatch {
            found: u32::try_from(found).unwrap_or(u32::MAX),
            expected: FORMAT_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| corrupt(format!("manifest: {e}")))
}

/// Rebuilds a store from archive bytes, rejecting any mismatch.
pub fn import_bytes(bytes: &[u8]) -> Result<StoreState> {
    let mut zip = ZipArchive::new(Cursor::new(bytes)).map_err(corrupt)?;
    let manifest = read_manifest_from(&mut zip)?;
    let mut files: HashMap<String, String> = HashMap::new();
    for i in 1..zip.len() {
        let (name, content) = read_entry(&mut zip, i)?;
        let expected = manifest
            .checksums
            .get(&name)
            .ok_or_else(|| corrupt(format!("unexpected entry `{name}`")))?;
        if &sha256_hex(&content) != expected {
            return Err(corrupt(format!("checksum mismatch in `{name}`")));
        }
        let text = String::from_utf8(content).map_err(|_| corrupt(format!("`{name}` is not UTF-8")))?;
        if files.insert(name.clone(), text).is_some() {
            return Err(corrupt(format!("duplicate entry `{name}`")));
        }
    }
    for name in manifest.checksums.keys() {
        if !files.contains_key(name) {
            return Err(corrupt(format!("missing entry `{name}`")));
        }
    }
    let state = StoreState::from_canonical(manifest.config.clone(), manifest.next_seq, &files)?;
    if state.counts() != manifest.record_counts {
        return Err(corrupt("record counts do not match the manifest"));
    }
    if state.state_digest() != manifest.state_digest {
        return Err(corrupt("state digest does not match the manifest"));
    }
    Ok(state)
}

/// Writes the archive to `path` through a sibling temporary file, so a
/// failed export never leaves a truncated archive behind.
pub fn export_to(state: &StoreState, path: &Path) -> Result<()> {
    let bytes = export_bytes(state)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn import_from(path: &Path) -> Result<StoreState> {
    import_bytes(&std::fs::read(path)?)
}

/// Whether the store survives export and import with its digest and bytes
/// intact. Reported next to the soulfulness score, not folded into it.
pub fn round_trip_fidelity(state: &StoreState) -> Result<bool> {
    let bytes = export_bytes(state)?;
    let back = import_bytes(&bytes)?;
    Ok(back.state_digest() == state.state_digest() && export_bytes(&back)? == bytes)
}
