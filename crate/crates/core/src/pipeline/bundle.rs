use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::PipelineError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InventoryEntry {
    /// Relative to the bundle root, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub millis: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

/// `manifest.json`: what ran, how long it took and what it wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub config_hash: String,
    pub input_sha256: String,
    pub stages: Vec<String>,
    pub timings: Vec<StageTiming>,
    pub failure: Option<StageFailure>,
    /// Every file under the bundle root except the manifest, sorted by path.
    pub inventory: Vec<InventoryEntry>,
    /// Digest over the inventory lines; equal bundles have equal digests
    /// regardless of timings.
    pub bundle_digest: String,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(root.join(MANIFEST)).map_err(|e| PipelineError::Input(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| PipelineError::Input(format!("{MANIFEST}: {e}")))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Output directory that stage code writes into.
#[derive(Debug, Clone)]
pub struct Bundle {
    root: PathBuf,
}

impl Bundle {
    pub fn create(root: &Path) -> Result<Self, PipelineError> {
        fs::create_dir_all(root).map_err(|e| PipelineError::Config(format!("output dir {}: {e}", root.display())))?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: &str, bytes: impl AsRef<[u8]>) -> std::io::Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(path, bytes)
    }

    pub fn write_json<T: Serialize>(&self, rel: &str, value: &T) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        text.push('\n');
        self.write(rel, text)
    }

    /// Walks the bundle, digesting every file but the manifest.
    pub fn inventory(&self) -> std::io::Result<Vec<InventoryEntry>> {
        let mut entries = Vec::new();
        let mut stack = vec![self.root.clone()];
        while let Some(dir) = stack.pop() {
            for entry in fs::read_dir(&dir)? {
                let path = entry?.path();
                if path.is_dir() {
                    stack.push(path);
                    continue;
                }
                let rel: Vec<String> = path
                    .strip_prefix(&self.root)
                    .expect("walk stays under root")
                    .components()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned())
                    .collect();
                let rel = rel.join("/");
                if rel == MANIFEST {
                    continue;
                }
                let bytes = fs::read(&path)?;
                entries.push(InventoryEntry { path: rel, bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
            }
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(entries)
    }
}

pub fn bundle_digest(inventory: &[InventoryEntry]) -> String {
    let mut h = Sha256::new();
    for e in inventory {
        h.update(format!("{}\t{}\t{}\n", e.path, e.bytes, e.sha256).as_bytes());
    }
    hex::encode(h.finalize())
}
