//! Run manifests: every command writes one next to its outputs, recording
//! the exact invocation, seeds, version, input/output digests, and
//! wall-clock time, so any output can be re-derived and checked
//! bit-for-bit.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, CliResult};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seeds: Vec<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub wall_ms: u128,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Io(format!("digest {}: {e}", path.display())))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(format!("{:x}", hasher.finalize()))
}

/// Collects digests while a command runs, then writes the manifest.
pub struct ManifestBuilder {
    command: String,
    argv: Vec<String>,
    seeds: Vec<u64>,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
    started: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str) -> Self {
        ManifestBuilder {
            command: command.to_string(),
            argv: std::env::args().collect(),
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: Instant::now(),
        }
    }

    pub fn seed(&mut self, s: u64) -> &mut Self {
        self.seeds.push(s);
        self
    }

    pub fn input(&mut self, path: &Path) -> CliResult<&mut Self> {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(self)
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Digest the recorded outputs and write the manifest to `path`.
    pub fn write(self, path: &Path) -> CliResult<()> {
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for p in &self.outputs {
            outputs.push(FileDigest {
                path: p.display().to_string(),
                sha256: sha256_file(p)?,
            });
        }
        let manifest = RunManifest {
            schema_version: crate::schemas::SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            argv: self.argv,
            seeds: self.seeds,
            inputs: self.inputs,
            outputs,
            wall_ms: self.started.elapsed().as_millis(),
        };
        crate::schemas::write_json(&manifest, path)
    }
}

/// Manifest location for a primary output: `fit.json` -> `fit.manifest.json`.
pub fn manifest_path_for(primary: &Path) -> PathBuf {
    let stem = primary
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "out".into());
    primary.with_file_name(format!("{stem}.manifest.json"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_records_digests() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, b"hello").unwrap();
        std::fs::write(&output, b"world").unwrap();
        let mut b = ManifestBuilder::new("test");
        b.seed(7);
        b.input(&input).unwrap();
        b.output(&output);
        let mpath = dir.path().join("m.json");
        b.write(&mpath).unwrap();
        let m: RunManifest = crate::schemas::read_json(&mpath).unwrap();
        assert_eq!(m.seeds, vec![7]);
        assert_eq!(m.inputs.len(), 1);
        assert_eq!(m.outputs.len(), 1);
        // Digest of b"world".
        assert_eq!(
            m.outputs[0].sha256,
            "486ea46224d1bb4fb680f34f7c9ad96a8f24ec88be73ea8e5a6c65260e9cb8a7"
        );
    }

    #[test]
    fn manifest_path_convention() {
        assert_eq!(
            manifest_path_for(Path::new("/tmp/fit.json")),
            PathBuf::from("/tmp/fit.manifest.json")
        );
    }
}
