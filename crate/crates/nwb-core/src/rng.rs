//! Deterministic seed derivation.
//!
//! Training and sampling derive every random draw from (seed, step, lane)
//! through a splitmix64 mix, so results are independent of evaluation order
//! and runs resume bit-exactly from any checkpoint.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// splitmix64 finalizer: a strong 64-bit mixing function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent stream seed from a base seed and a lane index.
pub fn mix(seed: u64, lane: u64) -> u64 {
    splitmix64(splitmix64(seed).wrapping_add(lane))
}

/// Derive a stream seed from a base seed and two lane indices.
pub fn mix3(seed: u64, a: u64, b: u64) -> u64 {
    mix(mix(seed, a), b)
}

/// Seeded generator for a derived stream.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
