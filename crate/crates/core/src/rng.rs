//! Project random number generator.
//!
//! ChaCha8 is counter based and produces the same stream on every platform,
//! so a `(seed, GENERATOR_VERSION)` pair identifies a dataset exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type ProjectRng = ChaCha8Rng;

/// Recorded in dataset manifests next to every seed.
pub const GENERATOR_VERSION: &str = "chacha8-v1";

pub fn rng_from_seed(seed: u64) -> ProjectRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for item `index` of a seeded collection.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
