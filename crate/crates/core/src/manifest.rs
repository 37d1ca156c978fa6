//! Provenance record written beside every CLI output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub inputs: BTreeMap<String, Vec<PathBuf>>,
    pub config: BTreeMap<String, Value>,
    pub rng_seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        RunManifest {
            command: command.into(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: BTreeMap::new(),
            config: BTreeMap::new(),
            rng_seed: None,
            outputs: Vec::new(),
            started_at: Utc::now(),
            finished_at: None,
        }
    }

    pub fn input(&mut self, name: &str, path: &Path) -> &mut Self {
        self.inputs.entry(name.to_string()).or_default().push(path.to_path_buf());
        self
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.config
            .insert(key.to_string(), serde_json::to_value(value).expect("serializable config"));
        self
    }

    pub fn rng(&mut self, seed: u64) -> &mut Self {
        self.rng_seed = Some(seed);
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.outputs.push(path.to_path_buf());
        self
    }

    /// Where the manifest for `output` goes: `<dir>/manifest.json` for a
    /// directory, `<file>.manifest.json` otherwise.
    pub fn path_for(output: &Path) -> PathBuf {
        if output.is_dir() {
            output.join("manifest.json")
        } else {
            let mut name = output.file_name().unwrap_or_default().to_os_string();
            name.push(".manifest.json");
            output.with_file_name(name)
        }
    }

    pub fn write_beside(&mut self, output: &Path) -> Result<PathBuf> {
        self.finished_at = Some(Utc::now());
        let path = Self::path_for(output);
        let text = serde_json::to_string_pretty(self).expect("serializable manifest");
        std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
