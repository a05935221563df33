//! Run manifests: what was run, on which inputs, producing which outputs.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

/// Git-style object digest: sha256 over `blob <len>\0<content>`.
pub fn content_digest(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    hex::encode(hasher.finalize())
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_digest(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: PathBuf,
    pub digest: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileRecord {
            path: path.to_path_buf(),
            digest: file_digest(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub command: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub timestamp: String,
    pub inputs: Vec<FileRecord>,
    /// Paths relative to the output directory.
    pub outputs: Vec<FileRecord>,
}

impl Manifest {
    /// Digests every input and every output; `outputs` must lie inside `out`.
    pub fn record(
        command: &str,
        argv: Vec<String>,
        seed: Option<u64>,
        config: serde_json::Value,
        timestamp: &str,
        inputs: &[PathBuf],
        out: &Path,
        outputs: &[PathBuf],
    ) -> Result<Self> {
        let inputs = inputs.iter().map(|p| FileRecord::of(p)).collect::<Result<Vec<_>>>()?;
        let mut records = Vec::with_capacity(outputs.len());
        for path in outputs {
            let relative = path
                .strip_prefix(out)
                .map_err(|_| Error::Metadata(format!("{} is outside {}", path.display(), out.display())))?;
            records.push(FileRecord {
                path: relative.to_path_buf(),
                digest: file_digest(path)?,
            });
        }
        records.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(Manifest {
            version: MANIFEST_VERSION,
            argv,
            command: command.to_string(),
            seed,
            config,
            timestamp: timestamp.to_string(),
            inputs,
            outputs: records,
        })
    }

    pub fn file_name(command: &str, timestamp: &str) -> String {
        format!("manifest_{command}_{timestamp}.json")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Version(manifest.version));
        }
        Ok(manifest)
    }

    /// Inputs whose current content differs from the recorded digest.
    pub fn changed_inputs(&self) -> Vec<PathBuf> {
        self.inputs
            .iter()
            .filter(|r| file_digest(&r.path).map_or(true, |d| d != r.digest))
            .map(|r| r.path.clone())
            .collect()
    }

    /// Recorded outputs missing from `out` or differing from their digest.
    pub fn mismatched_outputs(&self, out: &Path) -> Vec<PathBuf> {
        self.outputs
            .iter()
            .filter(|r| file_digest(&out.join(&r.path)).map_or(true, |d| d != r.digest))
            .map(|r| r.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_git_sha256_objects() {
        // `printf 'hello\n' | git hash-object --object-format=sha256 --stdin`
        assert_eq!(
            content_digest(b"hello\n"),
            "2cf8d83d9ee29543b34a87727421fdecb7e3f3a183d337639025de576db9ebb4"
        );
    }

    #[test]
    fn record_and_verify() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        std::fs::write(&input, "abc").unwrap();
        let out = dir.path().join("out");
        std::fs::create_dir_all(&out).unwrap();
        let output = out.join("o.csv");
        std::fs::write(&output, "1,2\n").unwrap();
        let m = Manifest::record("x", vec![], Some(1), serde_json::Value::Null, "t", std::slice::from_ref(&input), &out, std::slice::from_ref(&output))
            .unwrap();
        let path = dir.path().join("m.json");
        m.save(&path).unwrap();
        let back = Manifest::load(&path).unwrap();
        assert_eq!(back, m);
        assert!(back.changed_inputs().is_empty());
        assert!(back.mismatched_outputs(&out).is_empty());
        std::fs::write(&output, "1,3\n").unwrap();
        assert_eq!(back.mismatched_outputs(&out), vec![PathBuf::from("o.csv")]);
        std::fs::write(&input, "abd").unwrap();
        assert_eq!(back.changed_inputs(), vec![input]);
        assert!(Manifest::record("x", vec![], None, serde_json::Value::Null, "t", &[], dir.path().join("elsewhere").as_path(), &[output]).is_err());
    }
}
