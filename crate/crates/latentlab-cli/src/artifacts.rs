//! Output plumbing: write artifacts into one directory and close the run
//! with a `manifest.json` naming every file, its SHA-256, and its size.
//!
//! The manifest carries no timestamps and no machine details, so two runs
//! that produce the same bytes produce the same manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{io_error, CliError};

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        write!(out, "{b:02x}").unwrap();
    }
    out
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    sha256: String,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    format_version: u32,
    command: &'a str,
    crate_version: &'a str,
    /// Effective master seed, or null where the task had nothing to sample.
    seed: Option<u64>,
    config_sha256: &'a str,
    outputs: Vec<ManifestEntry>,
}

/// Artifact collector for a single run.
pub struct ArtifactSet {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactSet {
    /// Create (or reuse) the output directory.
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| io_error(&format!("creating {}", dir.display()), e))?;
        Ok(ArtifactSet { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    /// Write one artifact and record it for the manifest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| io_error(&format!("writing {}", path.display()), e))?;
        self.entries.push(ManifestEntry {
            file: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len() as u64,
        });
        Ok(())
    }

    /// Write `manifest.json` covering everything recorded so far.
    pub fn finish(
        mut self,
        command: &str,
        seed: Option<u64>,
        config_sha256: &str,
    ) -> Result<(), CliError> {
        // Listed by name, not write order, so reordered task internals do not
        // churn the manifest.
        self.entries.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest {
            format_version: 1,
            command,
            crate_version: env!("CARGO_PKG_VERSION"),
            seed,
            config_sha256,
            outputs: self.entries,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
        let path = self.dir.join("manifest.json");
        fs::write(&path, &text).map_err(|e| io_error(&format!("writing {}", path.display()), e))
    }
}
