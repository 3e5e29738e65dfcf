//! Versioned JSON checkpoint container.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::adam::AdamState;
use super::network::{Network, NetworkState};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub kind: String,
    pub seed: u64,
    pub networks: BTreeMap<String, NetworkState>,
    #[serde(default)]
    pub optimizers: BTreeMap<String, AdamState>,
    /// Content hashes of checkpoints this one depends on.
    #[serde(default)]
    pub references: BTreeMap<String, String>,
    #[serde(default)]
    pub meta: BTreeMap<String, serde_json::Value>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>, seed: u64) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            kind: kind.into(),
            seed,
            networks: BTreeMap::new(),
            optimizers: BTreeMap::new(),
            references: BTreeMap::new(),
            meta: BTreeMap::new(),
        }
    }

    pub fn with_network(mut self, name: &str, net: &Network) -> Self {
        self.networks.insert(name.to_string(), net.to_state());
        self
    }

    pub fn network(&self, name: &str, expected_hash: Option<&str>) -> Result<Network> {
        let state = self
            .networks
            .get(name)
            .ok_or_else(|| Error::InvalidCheckpoint(format!("no network named '{name}'")))?;
        Network::from_state(state, expected_hash)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("checkpoint serializes")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_slice(bytes)
            .map_err(|e| Error::InvalidCheckpoint(e.to_string()))?;
        if ck.format_version != CHECKPOINT_VERSION {
            return Err(Error::InvalidCheckpoint(format!(
                "unsupported format version {}",
                ck.format_version
            )));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(content_hash(&bytes))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingCheckpoint(path.to_path_buf()));
        }
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn content_hash(&self) -> String {
        content_hash(&self.to_bytes())
    }
}

pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(content_hash(&bytes))
}
