//! Run manifests and seed derivation.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Everything needed to re-run a command and get the same outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub cache_format_version: u16,
    pub command: String,
    /// Full argument vector, excluding the program name.
    pub args: Vec<String>,
    /// Input path -> SHA-256 hex digest of its contents.
    pub inputs: BTreeMap<String, String>,
    pub hyperparameters: BTreeMap<String, serde_json::Value>,
    pub seed: u64,
    pub stage_seeds: BTreeMap<String, u64>,
    pub outputs: Vec<String>,
    pub assumptions: Vec<String>,
    pub timestamp_unix: u64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>, args: Vec<String>, seed: u64) -> Self {
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            tool_version: TOOL_VERSION.to_string(),
            cache_format_version: crate::embedding::CACHE_VERSION,
            command: command.into(),
            args,
            inputs: BTreeMap::new(),
            hyperparameters: BTreeMap::new(),
            seed,
            stage_seeds: BTreeMap::new(),
            outputs: Vec::new(),
            assumptions: Vec::new(),
            timestamp_unix,
        }
    }

    pub fn record_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let digest = sha256_file(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn set_param(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.hyperparameters.insert(key.to_string(), v);
    }

    /// Derives, records and returns the seed for a named stage.
    pub fn stage_seed(&mut self, stage: &str) -> u64 {
        let s = derive_seed(self.seed, stage);
        self.stage_seeds.insert(stage.to_string(), s);
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// One step of the SplitMix64 generator.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stage seed = `splitmix64(seed ^ fnv1a64(stage))`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    splitmix64(seed ^ fnv1a64(stage.as_bytes()))
}

/// Seed for the `index`-th item of a stage (e.g. one of several random models).
pub fn derive_indexed_seed(seed: u64, stage: &str, index: u64) -> u64 {
    splitmix64(derive_seed(seed, stage) ^ splitmix64(index))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01B3)
    })
}
