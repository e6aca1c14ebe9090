use crate::config::PipelineConfig;
use anyhow::Context;
use p3_core::store::{hash_file, write_json};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

/// Written next to every stage's outputs: enough to rerun the stage and to
/// check that it consumed what the previous stage produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub duration_ms: u64,
}

pub fn hash_files(paths: &[PathBuf]) -> anyhow::Result<Vec<FileHash>> {
    let mut out: Vec<FileHash> = paths
        .iter()
        .map(|p| {
            Ok(FileHash {
                path: p.display().to_string(),
                sha256: hash_file(p).with_context(|| format!("hashing {}", p.display()))?,
            })
        })
        .collect::<anyhow::Result<_>>()?;
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

pub fn manifest_path(dir: &Path, stage: &str) -> PathBuf {
    dir.join(format!("{stage}.manifest.json"))
}

pub fn write_manifest(dir: &Path, manifest: &StageManifest) -> anyhow::Result<PathBuf> {
    let p = manifest_path(dir, &manifest.stage);
    write_json(&p, manifest)?;
    Ok(p)
}
