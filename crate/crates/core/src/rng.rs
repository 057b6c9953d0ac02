//! Seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator whose 32-byte seed is
//! derived from a master seed and a path of integer tags (trial, agent, phase, ...).
//! The rule is a SplitMix64 chain: the state starts at the master seed, each tag is
//! mixed in with `state = mix(state ^ mix(tag + C))`, and the four seed words are the
//! next four outputs of a SplitMix64 generator started at the final state.
//! Streams therefore depend only on their path, never on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a 64-bit seed from a master seed and a tag path.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix(master), |state, &tag| mix(state ^ mix(tag.wrapping_add(GOLDEN))))
}

/// Independent stream for `path` under `master`.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    let mut state = derive_seed(master, path);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        state = state.wrapping_add(GOLDEN);
        chunk.copy_from_slice(&mix(state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}
