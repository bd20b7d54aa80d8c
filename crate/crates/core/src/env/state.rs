use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnvError;
use crate::ctl::Value;

/// Records keyed by primary key.
pub type Table = BTreeMap<String, Value>;

/// One accepted step, appended by `Environment::apply_action`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: u32,
    pub action_kind: String,
    pub action: String,
    pub observation_kind: String,
    pub observation: String,
}

/// Complete world state. Everything a tool can read or write lives here, so a
/// snapshot captures the world exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    pub world: String,
    pub tables: BTreeMap<String, Table>,
    pub rng_seed: u64,
    pub step_count: u32,
    pub episode_log: Vec<Event>,
}

pub const SNAPSHOT_HEADER: &str = "CATFORGE-ENV v1\n";

impl EnvState {
    pub fn new(world: impl Into<String>, rng_seed: u64) -> Self {
        EnvState { world: world.into(), tables: BTreeMap::new(), rng_seed, step_count: 0, episode_log: Vec::new() }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.get(name)
    }

    pub fn table_mut(&mut self, name: &str) -> &mut Table {
        self.tables.entry(name.to_string()).or_default()
    }

    pub fn record(&self, table: &str, key: &str) -> Option<&Value> {
        self.tables.get(table)?.get(key)
    }

    pub fn record_mut(&mut self, table: &str, key: &str) -> Option<&mut Value> {
        self.tables.get_mut(table)?.get_mut(key)
    }

    fn body(&self) -> Vec<u8> {
        // BTreeMap iteration gives sorted tables, keys and map fields.
        serde_json::to_vec(self).unwrap_or_default()
    }

    /// Versioned, canonical byte dump.
    pub fn snapshot(&self) -> Vec<u8> {
        let mut out = SNAPSHOT_HEADER.as_bytes().to_vec();
        out.extend(self.body());
        out
    }

    pub fn restore(bytes: &[u8]) -> Result<EnvState, EnvError> {
        let body = bytes
            .strip_prefix(SNAPSHOT_HEADER.as_bytes())
            .ok_or_else(|| EnvError::CorruptSnapshot("missing CATFORGE-ENV v1 header".into()))?;
        serde_json::from_slice(body).map_err(|e| EnvError::CorruptSnapshot(e.to_string()))
    }

    /// Lowercase hex SHA-256 of the canonical serialization.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.body()))
    }

    /// Digest of the tables alone, ignoring step bookkeeping.
    pub fn tables_digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(&self.tables).unwrap_or_default()))
    }
}
