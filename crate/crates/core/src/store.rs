//! On-disk layout of the normalized store and the small file helpers shared
//! by every pipeline stage (JSON-Lines, content hashes).
//!
//! ```text
//! store/<match_id>.snapshots.jsonl   one PassSnapshot per line
//! store/<match_id>.roster.json       lineups + substitutions + match end
//! store/manifest.json                schema version and per-match counts
//! ```

use crate::ingest::{self, IngestError, JoinStats, PassSnapshot, Roster};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: &str = "statsbomb-open-data-v2/1";

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Json {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Ingest { path: PathBuf, source: IngestError },
    #[error("store not found at {0}")]
    Missing(PathBuf),
    #[error("store schema {found:?} is not supported (expected {SCHEMA_VERSION:?})")]
    Schema { found: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, StoreError> {
    Ok(sha256_hex(&fs::read(path).map_err(io_err(path))?))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, StoreError> {
    fs::read(path).map_err(io_err(path))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, bytes).map_err(io_err(path))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), StoreError> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, StoreError> {
    let bytes = read_file(path)?;
    serde_json::from_slice(&bytes).map_err(|source| StoreError::Json {
        path: path.to_path_buf(),
        line: 0,
        source,
    })
}

pub fn write_jsonl<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<(), StoreError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).map_err(|source| StoreError::Json {
            path: path.to_path_buf(),
            line: 0,
            source,
        })?;
        buf.push(b'\n');
    }
    write_file(path, &buf)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line).map_err(|source| StoreError::Json {
                path: path.to_path_buf(),
                line: i + 1,
                source,
            })?,
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub passes: usize,
    pub snapshots: usize,
    pub unmatched: usize,
    pub without_opponents: usize,
    pub duplicate_frames: usize,
    pub clamped: usize,
    pub skipped_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreManifest {
    pub schema_version: String,
    pub matches: BTreeMap<String, MatchCounts>,
}

/// Everything ingest produces for one match.
#[derive(Debug, Clone)]
pub struct MatchIngest {
    pub match_id: String,
    pub snapshots: Vec<PassSnapshot>,
    pub roster: Option<Roster>,
    pub counts: MatchCounts,
}

/// Parse and join one match from raw file contents.
pub fn ingest_match(
    match_id: &str,
    events_raw: &[u8],
    frames_raw: &[u8],
    lineups_raw: Option<&[u8]>,
) -> Result<MatchIngest, IngestError> {
    let events = ingest::parse_events(match_id, events_raw)?;
    let frames = ingest::parse_frames(frames_raw)?;
    let roster = match lineups_raw {
        Some(raw) => {
            let mut r = ingest::parse_lineups(match_id, raw)?;
            r.attach_events(&events.records);
            Some(r)
        }
        None => None,
    };
    let (
        snapshots,
        JoinStats {
            passes,
            snapshots: n_snap,
            unmatched,
            without_opponents,
            duplicate_frames,
        },
    ) = ingest::join_pass_frames(&events.records, &frames.records);
    Ok(MatchIngest {
        match_id: match_id.to_string(),
        snapshots,
        roster,
        counts: MatchCounts {
            passes,
            snapshots: n_snap,
            unmatched,
            without_opponents,
            duplicate_frames,
            clamped: events.clamped + frames.clamped,
            skipped_records: events.skipped.len() + frames.skipped.len(),
        },
    })
}

fn json_stems(dir: &Path) -> Result<Vec<String>, StoreError> {
    let mut stems = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                stems.push(stem.to_string());
            }
        }
    }
    stems.sort();
    Ok(stems)
}

/// Read a StatsBomb open-data style directory (`events/`, `three-sixty/`,
/// `lineups/`). Only matches that have a 360 file are ingested.
pub fn ingest_dir(data_dir: &Path) -> Result<Vec<MatchIngest>, StoreError> {
    let frames_dir = data_dir.join("three-sixty");
    if !frames_dir.is_dir() {
        return Err(StoreError::Missing(frames_dir));
    }
    let mut out = Vec::new();
    for match_id in json_stems(&frames_dir)? {
        let events_path = data_dir.join("events").join(format!("{match_id}.json"));
        let frames_path = frames_dir.join(format!("{match_id}.json"));
        let lineups_path = data_dir.join("lineups").join(format!("{match_id}.json"));
        let events_raw = read_file(&events_path)?;
        let frames_raw = read_file(&frames_path)?;
        let lineups_raw = if lineups_path.exists() {
            Some(read_file(&lineups_path)?)
        } else {
            None
        };
        let m = ingest_match(&match_id, &events_raw, &frames_raw, lineups_raw.as_deref()).map_err(
            |source| StoreError::Ingest {
                path: events_path.clone(),
                source,
            },
        )?;
        out.push(m);
    }
    Ok(out)
}

pub fn snapshots_path(store: &Path, match_id: &str) -> PathBuf {
    store.join(format!("{match_id}.snapshots.jsonl"))
}

pub fn roster_path(store: &Path, match_id: &str) -> PathBuf {
    store.join(format!("{match_id}.roster.json"))
}

pub fn manifest_path(store: &Path) -> PathBuf {
    store.join("manifest.json")
}

/// Write all matches and then the manifest. Returns the written paths.
pub fn write_store(store: &Path, matches: &[MatchIngest]) -> Result<Vec<PathBuf>, StoreError> {
    fs::create_dir_all(store).map_err(io_err(store))?;
    let mut written = Vec::new();
    let mut manifest = StoreManifest {
        schema_version: SCHEMA_VERSION.to_string(),
        matches: BTreeMap::new(),
    };
    for m in matches {
        let p = snapshots_path(store, &m.match_id);
        write_jsonl(&p, &m.snapshots)?;
        written.push(p);
        if let Some(r) = &m.roster {
            let p = roster_path(store, &m.match_id);
            write_json(&p, r)?;
            written.push(p);
        }
        manifest
            .matches
            .insert(m.match_id.clone(), m.counts.clone());
    }
    let p = manifest_path(store);
    write_json(&p, &manifest)?;
    written.push(p);
    Ok(written)
}

pub fn read_manifest(store: &Path) -> Result<StoreManifest, StoreError> {
    let p = manifest_path(store);
    if !p.exists() {
        return Err(StoreError::Missing(store.to_path_buf()));
    }
    let m: StoreManifest = read_json(&p)?;
    if m.schema_version != SCHEMA_VERSION {
        return Err(StoreError::Schema {
            found: m.schema_version,
        });
    }
    Ok(m)
}

pub fn read_snapshots(store: &Path, match_id: &str) -> Result<Vec<PassSnapshot>, StoreError> {
    read_jsonl(&snapshots_path(store, match_id))
}

/// Rosters for every match in the manifest that has one.
pub fn read_rosters(store: &Path) -> Result<Vec<Roster>, StoreError> {
    let manifest = read_manifest(store)?;
    let mut out = Vec::new();
    for match_id in manifest.matches.keys() {
        let p = roster_path(store, match_id);
        if p.exists() {
            out.push(read_json(&p)?);
        }
    }
    Ok(out)
}

/// Input files a downstream stage depends on (manifest, snapshots, rosters).
pub fn store_files(store: &Path) -> Result<Vec<PathBuf>, StoreError> {
    let manifest = read_manifest(store)?;
    let mut files = vec![manifest_path(store)];
    for match_id in manifest.matches.keys() {
        files.push(snapshots_path(store, match_id));
        let r = roster_path(store, match_id);
        if r.exists() {
            files.push(r);
        }
    }
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_store() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            read_manifest(&dir.path().join("nope")),
            Err(StoreError::Missing(_))
        ));
    }

    #[test]
    fn store_round_trip_is_deterministic() {
        let events = br#"[{"id": "e1", "minute": 1, "type": {"name": "Pass"}, "team": {"id": 1},
            "player": {"id": 2}, "location": [60, 40], "pass": {"body_part": {"name": "Left Foot"}}}]"#;
        let frames = br#"[{"event_uuid": "e1", "freeze_frame": [
            {"teammate": false, "location": [130, 40]}]}]"#;
        let m = ingest_match("m1", events, frames, None).unwrap();
        assert_eq!(m.counts.clamped, 1);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        write_store(a.path(), std::slice::from_ref(&m)).unwrap();
        write_store(b.path(), &[m]).unwrap();
        for f in ["manifest.json", "m1.snapshots.jsonl"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
        let back = read_snapshots(a.path(), "m1").unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].frame.players[0].location.x, 120.0);
    }
}
