//! Per-stage provenance: content hashes of everything read and written.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliResult;

pub const ARTIFACT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// No timestamps or absolute paths, so identical runs produce identical
/// manifests.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub stage: String,
    pub artifact_version: u32,
    pub tool_version: String,
    pub config_sha256: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub struct ManifestBuilder<'a> {
    output_dir: &'a Path,
    config_dir: &'a Path,
    manifest: Manifest,
}

impl<'a> ManifestBuilder<'a> {
    pub fn new(stage: &str, config_hash: &str, output_dir: &'a Path, config_dir: &'a Path) -> Self {
        ManifestBuilder {
            output_dir,
            config_dir,
            manifest: Manifest {
                stage: stage.to_string(),
                artifact_version: ARTIFACT_VERSION,
                tool_version: env!("CARGO_PKG_VERSION").to_string(),
                config_sha256: config_hash.to_string(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
        }
    }

    /// Output-relative when under the output directory, else config-relative,
    /// else the bare file name.
    fn display(&self, path: &Path) -> String {
        let rel = path
            .strip_prefix(self.output_dir)
            .or_else(|_| path.strip_prefix(self.config_dir))
            .map(Path::to_path_buf)
            .unwrap_or_else(|_| path.file_name().map(PathBuf::from).unwrap_or_default());
        rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let digest = FileDigest {
            path: self.display(path),
            sha256: sha256_hex(&std::fs::read(path)?),
        };
        self.manifest.inputs.push(digest);
        Ok(())
    }

    pub fn input_bytes(&mut self, name: &str, bytes: &[u8]) {
        self.manifest.inputs.push(FileDigest {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        let digest = FileDigest {
            path: self.display(path),
            sha256: sha256_hex(&std::fs::read(path)?),
        };
        self.manifest.outputs.push(digest);
        Ok(())
    }

    /// Writes `manifests/<stage>.json` under the output directory.
    pub fn finish(self) -> CliResult<PathBuf> {
        let path = self.output_dir.join("manifests").join(format!("{}.json", self.manifest.stage));
        crate::stages::write_file(&path, format!("{}\n", serde_json::to_string_pretty(&self.manifest)?).as_bytes())?;
        Ok(path)
    }
}
