//! Output directory handling and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "DGNET_OUTPUT_ROOT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// `--out` when given, else `$DGNET_OUTPUT_ROOT/<command>`, else `runs/<command>`.
pub fn resolve_dir(out: Option<&Path>, command: &str) -> PathBuf {
    match out {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}

#[derive(Debug, Serialize)]
struct Artifact {
    path: String,
    bytes: u64,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a Value,
    config_sha256: String,
    seeds: &'a BTreeMap<String, u64>,
    threads: usize,
    formats: BTreeMap<&'static str, &'static str>,
    created_unix: u64,
    artifacts: Vec<Artifact>,
}

/// Collects the artifacts of one run and writes `manifest.json` last.
pub struct Run {
    pub dir: PathBuf,
    command: String,
    config: Value,
    seeds: BTreeMap<String, u64>,
    artifacts: Vec<String>,
}

impl Run {
    pub fn create(dir: PathBuf, command: &str, config: Value) -> Result<Self> {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir, command: command.into(), config, seeds: BTreeMap::new(), artifacts: Vec::new() })
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.into(), value);
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.join(rel)
    }

    /// Records `rel` (relative to the run directory) as an artifact.
    pub fn record(&mut self, rel: impl Into<String>) {
        self.artifacts.push(rel.into());
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record(rel);
        Ok(())
    }

    pub fn finish(self) -> Result<PathBuf> {
        let canonical = serde_json::to_string(&self.config)?;
        let mut artifacts = Vec::with_capacity(self.artifacts.len());
        for rel in &self.artifacts {
            let bytes = fs::read(self.dir.join(rel)).with_context(|| format!("hashing {rel}"))?;
            artifacts.push(Artifact { path: rel.clone(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) });
        }
        let manifest = Manifest {
            tool: "dgnet",
            version: env!("CARGO_PKG_VERSION"),
            command: &self.command,
            config: &self.config,
            config_sha256: sha256_hex(canonical.as_bytes()),
            seeds: &self.seeds,
            threads: rayon::current_num_threads(),
            formats: BTreeMap::from([("frames", "DGF1"), ("checkpoint", "DGNETCK1"), ("mesh", dgnet_core::mesh::MESH_SCHEMA)]),
            created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            artifacts,
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn explicit_out_wins() {
        assert_eq!(resolve_dir(Some(Path::new("x")), "solve"), PathBuf::from("x"));
    }
}
