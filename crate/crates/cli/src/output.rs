use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Output directory plus the record of everything written to it.
pub struct Output {
    dir: PathBuf,
    written: Vec<String>,
    inputs: Vec<Input>,
    started: Instant,
}

#[derive(Clone, Debug, Serialize)]
pub struct Input {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    command: &'a [String],
    config_sha256: Option<&'a str>,
    inputs: &'a [Input],
    outputs: &'a [String],
    wall_time_seconds: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            inputs: Vec::new(),
            started: Instant::now(),
        })
    }

    /// Reads an input file and records its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<String> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.push(Input {
            path: path.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        });
        Ok(text)
    }

    /// Writes `name` (relative, `/`-separated) and returns the relative path.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<String> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(name.to_string())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<String> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json`; the only output that varies between identical runs.
    pub fn finish(mut self, command: &[String]) -> Result<()> {
        let config = self.inputs.first().map(|i| i.sha256.clone());
        let written = std::mem::take(&mut self.written);
        let inputs = std::mem::take(&mut self.inputs);
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: config.as_deref(),
            inputs: &inputs,
            outputs: &written,
            wall_time_seconds: self.started.elapsed().as_secs_f64(),
        };
        self.write_json("manifest.json", &manifest)?;
        Ok(())
    }
}
