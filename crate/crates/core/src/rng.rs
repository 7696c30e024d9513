//! Seed derivation for reproducible parallel simulation.
//!
//! Every consumer of randomness gets its own counter-based stream keyed by
//! (master seed, stream kind, entity index). Replicas and layers therefore
//! draw from independent streams regardless of scheduling order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// What a derived stream is used for. The discriminant is mixed into the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Poisson arrival instants of one sensor.
    Arrivals = 1,
    /// Realization draws of one sensor.
    Realizations = 2,
    /// Per-round channel outcomes of one link.
    Channel = 3,
    /// Sampled drop thresholds of one link.
    Thresholds = 4,
    /// Scenario generation (positions, feature samples).
    Scenario = 5,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an independent ChaCha stream from the master seed.
pub fn stream(master: u64, kind: StreamKind, entity: u64) -> ChaCha12Rng {
    let mut state = master
        ^ (kind as u64).wrapping_mul(0xa076_1d64_78bd_642f)
        ^ entity.wrapping_mul(0xe703_7ed1_a0b4_28db);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Seed for an independent replica: replicas are entities of the master seed.
pub fn replica_seed(master: u64, replica: u64) -> u64 {
    let mut state = master ^ replica.wrapping_mul(0xd6e8_feb8_6659_fd93);
    splitmix64(&mut state)
}
