//! Federated orchestration: device identity, registry, wire protocol,
//! aggregation, and the server/client state machines.

pub mod aggregate;
pub mod client;
pub mod protocol;
pub mod registry;
pub mod round;
pub mod server;
pub mod sim;

pub use aggregate::aggregate;
pub use registry::Registry;
pub use round::{ClientPool, ClientUpdate, GlobalModel, PhaseTimings, RoundEngine, RoundRecord};

use serde::{Deserialize, Serialize};

/// Client device identity; the server reserves id 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl DeviceId {
    pub const SERVER: DeviceId = DeviceId(0);
}

impl std::fmt::Display for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}
