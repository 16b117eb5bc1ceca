use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Written next to every artifact as `<artifact>.manifest.json`.
#[derive(Serialize)]
pub struct RunManifest {
    pub tool_version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    /// Input path -> SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub seed: Option<u64>,
    /// Stage -> seconds.
    pub timings: BTreeMap<String, f64>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize) -> Result<Self> {
        Ok(RunManifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            command: command.to_owned(),
            config: serde_json::to_value(config)?,
            inputs: BTreeMap::new(),
            seed: None,
            timings: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn timing(&mut self, stage: &str, elapsed: Duration) {
        self.timings.insert(stage.to_owned(), elapsed.as_secs_f64());
    }

    /// Records `artifact` as an output and writes the manifest beside it.
    pub fn write_for(mut self, artifact: &Path) -> Result<PathBuf> {
        self.outputs.push(artifact.to_path_buf());
        let mut name = artifact.as_os_str().to_owned();
        name.push(".manifest.json");
        let path = PathBuf::from(name);
        let json = serde_json::to_string_pretty(&self)?;
        fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
