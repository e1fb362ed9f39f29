//! Deterministic random streams.
//!
//! Every source of randomness in an experiment is a ChaCha8 stream seeded
//! from `(master_seed, domain, device, round)` through a splitmix64 mix.
//! Two streams with different coordinates are statistically independent, so
//! re-drawing one client's jitter never shifts another client's draws, and a
//! client process can reproduce exactly the stream the simulator would have
//! used for it.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domain tags. Each distinct use of randomness gets its own tag so
/// streams never alias across purposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Global model weight initialization (server side, round 0).
    ModelInit,
    /// Per-(device, round) channel report sampling.
    ChannelReport,
    /// Per-(device, round) local training: batch pixel choice and
    /// stratified jitter along rays.
    LocalTrain,
    /// Procedural scene generation.
    Scene,
}

impl Domain {
    fn tag(self) -> u64 {
        match self {
            Domain::ModelInit => 1,
            Domain::ChannelReport => 2,
            Domain::LocalTrain => 3,
            Domain::Scene => 4,
        }
    }
}

/// splitmix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the 64-bit sub-seed for `(master, domain, device, round)`.
pub fn derive_seed(master: u64, domain: Domain, device: u32, round: u32) -> u64 {
    let mut h = mix(master);
    h = mix(h ^ domain.tag());
    h = mix(h ^ u64::from(device));
    mix(h ^ u64::from(round))
}

/// The stream for `(master, domain, device, round)`.
pub fn stream(master: u64, domain: Domain, device: u32, round: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, device, round))
}
