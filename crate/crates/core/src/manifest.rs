//! Run manifests: everything needed to repeat a run.
//!
//! Wall-clock timings are only included on request, so that by default two
//! runs with the same seed write byte-identical manifests.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub seed: u64,
    /// Echo of the resolved configuration.
    pub config: serde_json::Value,
    /// Files written by the run, relative to the output directory.
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_secs: Option<BTreeMap<String, f64>>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config,
            outputs: Vec::new(),
            timings_secs: None,
        }
    }

    pub fn add_output(&mut self, name: impl Into<String>) {
        self.outputs.push(name.into());
    }

    pub fn record_timing(&mut self, stage: &str, secs: f64) {
        self.timings_secs
            .get_or_insert_with(BTreeMap::new)
            .insert(stage.to_string(), secs);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}
