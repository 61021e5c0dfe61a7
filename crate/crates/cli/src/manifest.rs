use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Record of one invocation, written beside its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub tool_version: String,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub config_hashes: BTreeMap<String, String>,
    pub input_digests: BTreeMap<String, String>,
    pub output_digests: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: None,
            jobs: None,
            config_hashes: BTreeMap::new(),
            input_digests: BTreeMap::new(),
            output_digests: BTreeMap::new(),
            started_at: now(),
            finished_at: String::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.input_digests.insert(path.display().to_string(), digest_path(path)?);
        Ok(())
    }

    /// Digests `outputs` and writes the manifest into `dir`.
    pub fn finish(mut self, dir: &Path, outputs: &[PathBuf]) -> Result<()> {
        for file in outputs {
            let rel = file.strip_prefix(dir).unwrap_or(file).display().to_string();
            self.output_digests.insert(rel, digest_file(file)?);
        }
        self.finished_at = now();
        let mut bytes = serde_json::to_vec_pretty(&self)?;
        bytes.push(b'\n');
        let path = dir.join(RUN_MANIFEST);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).with_context(|| format!("cannot list {}", d.display()))? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// SHA-256 of a file, or of the sorted `relative-path digest` lines of
/// every file under a directory.
pub fn digest_path(path: &Path) -> Result<String> {
    if !path.is_dir() {
        return digest_file(path);
    }
    let mut hasher = Sha256::new();
    for file in list_files(path)? {
        let rel = file.strip_prefix(path).unwrap_or(&file).display().to_string();
        hasher.update(format!("{rel} {}\n", digest_file(&file)?));
    }
    Ok(hex::encode(hasher.finalize()))
}
