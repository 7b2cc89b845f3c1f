//! Write-once artifacts and their manifests.
//!
//! Every command writes its outputs through an [`OutputSet`] and finishes
//! with a manifest under `<output_dir>/manifests/`. An existing file is
//! never replaced: rewriting identical bytes is accepted, anything else is
//! refused. A manifest left by a different configuration makes the command
//! refuse before it writes anything.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::MissingArtifact(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    /// The resolved settings the command used.
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// Command-specific results: counts, skipped items, failures.
    pub details: serde_json::Value,
    /// Seconds since the Unix epoch; the only field that varies between
    /// identical runs.
    pub created_at: u64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::MissingArtifact(format!("manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Other(anyhow::anyhow!("manifest {}: {e}", path.display())))
    }
}

/// The outputs of one command invocation.
pub struct OutputSet {
    root: PathBuf,
    command: String,
    manifest_name: String,
    config: serde_json::Value,
    config_hash: String,
    seed: u64,
    inputs: Vec<FileDigest>,
    outputs: BTreeMap<String, String>,
}

impl OutputSet {
    /// `manifest_name` identifies the invocation (e.g. `train-user-U1`).
    /// The config hash covers the command, its settings and the content of
    /// every input.
    pub fn begin(
        root: &Path,
        command: &str,
        manifest_name: &str,
        config: serde_json::Value,
        seed: u64,
        inputs: &[&Path],
    ) -> Result<Self, CliError> {
        let mut digests = Vec::new();
        for p in inputs {
            digests.push(FileDigest {
                path: p.display().to_string(),
                sha256: hash_file(p)?,
            });
        }
        let hashed = serde_json::json!({
            "command": command,
            "config": config,
            "seed": seed,
            "inputs": digests.iter().map(|d| &d.sha256).collect::<Vec<_>>(),
        });
        let config_hash = sha256_hex(hashed.to_string().as_bytes());
        let set = Self {
            root: root.to_owned(),
            command: command.to_owned(),
            manifest_name: manifest_name.to_owned(),
            config,
            config_hash,
            seed,
            inputs: digests,
            outputs: BTreeMap::new(),
        };
        let previous = set.manifest_path();
        if previous.exists() {
            let old = Manifest::load(&previous)?;
            if old.config_hash != set.config_hash {
                return Err(CliError::Conflict(format!(
                    "{} was produced with config hash {} but this run has {}; use a fresh output directory",
                    previous.display(),
                    old.config_hash,
                    set.config_hash
                )));
            }
        }
        Ok(set)
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn manifest_path(&self) -> PathBuf {
        self.root.join("manifests").join(format!("{}.json", self.manifest_name))
    }

    /// Write `bytes` to `rel` under the output root unless the file already
    /// holds exactly these bytes. Paths already under the root are taken
    /// as they are.
    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let rel = rel.as_ref();
        let rel = rel.strip_prefix(&self.root).unwrap_or(rel);
        let bytes = bytes.as_ref();
        let path = self.root.join(rel);
        write_once(&path, bytes)?;
        self.outputs
            .insert(rel.to_string_lossy().replace('\\', "/"), sha256_hex(bytes));
        Ok(path)
    }

    /// Write the manifest, replacing an earlier one from the same
    /// configuration (they differ only in `created_at`).
    pub fn finish(self, details: serde_json::Value) -> Result<Manifest, CliError> {
        let manifest = Manifest {
            command: self.command.clone(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_hash: self.config_hash.clone(),
            seed: self.seed,
            config: self.config.clone(),
            inputs: self.inputs.clone(),
            outputs: self
                .outputs
                .iter()
                .map(|(path, sha256)| FileDigest {
                    path: path.clone(),
                    sha256: sha256.clone(),
                })
                .collect(),
            details,
            created_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        };
        let path = self.manifest_path();
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        Ok(manifest)
    }
}

fn write_once(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if path.exists() {
        let existing = std::fs::read(path)?;
        if existing == bytes {
            return Ok(());
        }
        return Err(CliError::Conflict(format!(
            "{} already exists with different content",
            path.display()
        )));
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn write_once_semantics() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "x").unwrap();
        let cfg = serde_json::json!({"a": 1});
        let mut set = OutputSet::begin(dir.path(), "demo", "demo", cfg.clone(), 1, &[&input]).unwrap();
        set.write("out/a.txt", "hello").unwrap();
        set.write("out/a.txt", "hello").unwrap();
        assert!(matches!(set.write("out/a.txt", "other"), Err(CliError::Conflict(_))));
        let m = set.finish(serde_json::json!({})).unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].sha256, sha256_hex(b"hello"));

        // same configuration may rerun; a different one is refused
        assert!(OutputSet::begin(dir.path(), "demo", "demo", cfg, 1, &[&input]).is_ok());
        let other = OutputSet::begin(dir.path(), "demo", "demo", serde_json::json!({"a": 2}), 1, &[&input]);
        assert!(matches!(other, Err(CliError::Conflict(_))));
        std::fs::write(&input, "changed").unwrap();
        let changed = OutputSet::begin(dir.path(), "demo", "demo", serde_json::json!({"a": 1}), 1, &[&input]);
        assert!(matches!(changed, Err(CliError::Conflict(_))));
    }
}
