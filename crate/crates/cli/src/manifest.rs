use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_paths: Vec<String>,
    pub seed: Option<u64>,
    pub code_version: String,
    /// SHA-256 of every input file; directories are expanded.
    pub input_digests: BTreeMap<String, String>,
    pub output_paths: Vec<String>,
    pub wall_clock_seconds: f64,
}

pub struct ManifestBuilder {
    command: &'static str,
    started: Instant,
    config_paths: Vec<String>,
    seed: Option<u64>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl ManifestBuilder {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            config_paths: Vec::new(),
            seed: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, path: &Path) -> Result<()> {
        self.config_paths.push(path.display().to_string());
        self.input(path)
    }

    pub fn seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Digests `path`, or every file below it when it is a directory.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        for file in files_under(path)? {
            self.inputs.insert(file.display().to_string(), sha256_file(&file)?);
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let manifest = RunManifest {
            command: self.command.to_string(),
            args: std::env::args().collect(),
            config_paths: self.config_paths,
            seed: self.seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digests: self.inputs,
            output_paths: self.outputs,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let text = serde_json::to_string_pretty(&manifest)?;
        fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
    }
}

fn files_under(path: &Path) -> Result<Vec<PathBuf>> {
    if !path.is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    let mut out = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for entry in entries {
        out.extend(files_under(&entry)?);
    }
    Ok(out)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex(&Sha256::digest(&bytes)))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
