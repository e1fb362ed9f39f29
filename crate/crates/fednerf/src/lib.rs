//! Federated NeRF training at desk scale.
//!
//! A small NeRF is trained collaboratively by several clients that each hold
//! posed images of one side of a scene. Every round the server samples the
//! simulated wireless channel of every client, picks `k` of them with a
//! score that trades transmission rate against fairness (the `q`
//! hyper-parameter), broadcasts the global parameters to the chosen clients
//! only, aggregates their locally trained updates, and logs test-view PSNR
//! together with the selected-rate ratio.
//!
//! The same round engine runs in-process (`sim` mode) or over a
//! length-prefixed TCP protocol (`server`/`client` modes); with equal seeds
//! the two produce the same selections and parameters.

pub mod channel;
pub mod error;
pub mod fl;
pub mod harness;
pub mod nerf;
pub mod rng;
pub mod select;

pub use error::{Error, Result};
