//! Output directories and run manifests.
//!
//! Every file goes through [`OutputDir::write`], which records its SHA-256.
//! The manifest (`manifest.json`) is written last and lists every other
//! file, so a directory can be checked against it later.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub phi_deg: f64,
    pub exit_angle_deg: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_residual: f64,
    pub max_cell_imbalance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub verb: String,
    pub threads: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Resolved configuration in case-file syntax.
    pub config: Option<String>,
    pub rows: Vec<RowSummary>,
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn sha256_hex(data: &[u8]) -> String {
    format!("{:x}", Sha256::digest(data))
}

/// Output directory that tracks what was written into it.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> std::io::Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(OutputDir {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&mut self, rel: &str, data: &[u8]) -> std::io::Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, data)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: data.len() as u64,
            sha256: sha256_hex(data),
        });
        Ok(())
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    /// Removes everything written so far except logs and manifests.
    pub fn discard_outputs(&mut self) {
        self.files.retain(|f| {
            let keep = f.path.ends_with(".log") || f.path.ends_with(MANIFEST_NAME);
            if !keep {
                let _ = std::fs::remove_file(self.root.join(&f.path));
            }
            keep
        });
    }

    /// Writes `manifest.json` listing every recorded file.
    pub fn finish(&mut self, mut manifest: RunManifest) -> std::io::Result<RunManifest> {
        manifest.files = self
            .files
            .iter()
            .filter(|f| f.path != MANIFEST_NAME)
            .cloned()
            .collect();
        manifest.finished_unix = unix_now();
        let json = serde_json::to_vec_pretty(&manifest).map_err(std::io::Error::other)?;
        std::fs::write(self.root.join(MANIFEST_NAME), json)?;
        Ok(manifest)
    }
}

/// Files in `root` (recursively) that are missing from the manifest or whose
/// hash differs. The manifest itself is exempt.
pub fn verify_manifest(root: &Path) -> std::io::Result<Vec<String>> {
    let text = std::fs::read_to_string(root.join(MANIFEST_NAME))?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(std::io::Error::other)?;
    let mut problems = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir)? {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
                continue;
            }
            let rel = path
                .strip_prefix(root)
                .map_err(std::io::Error::other)?
                .components()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .collect::<Vec<_>>()
                .join("/");
            if rel == MANIFEST_NAME || rel.ends_with(&format!("/{MANIFEST_NAME}")) {
                continue;
            }
            let data = std::fs::read(&path)?;
            match manifest.files.iter().find(|f| f.path == rel) {
                Some(f) if f.sha256 == sha256_hex(&data) => {}
                Some(_) => problems.push(format!("{rel}: hash mismatch")),
                None => problems.push(format!("{rel}: not in manifest")),
            }
        }
    }
    problems.sort();
    Ok(problems)
}
