//! Device registry: maps device ids to network addresses.

use crate::error::{Error, Result};
use crate::fl::DeviceId;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub host: String,
    pub port: u16,
}

/// JSON file mapping decimal id strings to endpoints. Id 0 is the server.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    entries: BTreeMap<String, Endpoint>,
}

impl Registry {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let registry: Registry =
            serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        for key in registry.entries.keys() {
            if key.parse::<u32>().is_err() {
                return Err(Error::Config(format!(
                    "registry {}: key {key:?} is not a decimal device id",
                    path.display()
                )));
            }
        }
        Ok(registry)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("registry serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn insert(&mut self, id: DeviceId, endpoint: Endpoint) {
        self.entries.insert(id.0.to_string(), endpoint);
    }

    pub fn get(&self, id: DeviceId) -> Option<&Endpoint> {
        self.entries.get(&id.0.to_string())
    }

    pub fn server(&self) -> Result<&Endpoint> {
        self.get(DeviceId::SERVER)
            .ok_or_else(|| Error::Config("registry has no server entry (id 0)".into()))
    }

    pub fn contains(&self, id: DeviceId) -> bool {
        self.get(id).is_some()
    }

    /// Every configured client id plus the server must be present.
    pub fn validate_for(&self, n_clients: u32) -> Result<()> {
        self.server()?;
        for id in 1..=n_clients {
            if !self.contains(DeviceId(id)) {
                return Err(Error::Config(format!("registry is missing client id {id}")));
            }
        }
        Ok(())
    }
}
