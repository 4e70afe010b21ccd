//! Run artifacts and the manifest.
//!
//! Tables are collected in memory and written only once the run has finished, so a failed run
//! never leaves half-written CSV files behind. Timestamps appear only in the manifest.

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::fs;
use std::io;
use std::path::Path;

#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    pub fn add(&mut self, name: &str, body: Vec<u8>) {
        self.files.push((name.to_string(), body));
    }

    pub fn write_all(&self, dir: &Path) -> io::Result<Vec<OutputFile>> {
        fs::create_dir_all(dir)?;
        self.files
            .iter()
            .map(|(name, body)| {
                fs::write(dir.join(name), body)?;
                Ok(OutputFile {
                    file: name.clone(),
                    bytes: body.len(),
                    sha256: sha256_hex(body),
                })
            })
            .collect()
    }
}

#[derive(Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub library_version: &'static str,
    pub experiment: &'static str,
    pub config_path: String,
    pub config_sha256: String,
    pub seed: u64,
    pub threads: usize,
    /// "ok" or "numerical-breach".
    pub status: &'static str,
    pub error: Option<String>,
    pub started_unix_s: u64,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
    pub summary: Value,
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self).map_err(io::Error::other)?;
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
