//! Seeded randomness. Every randomized operation takes a 64-bit seed and
//! draws from ChaCha8, so outputs replay bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded alongside seeds in outputs.
pub const GENERATOR: &str = "chacha8";

/// Seed used by randomized commands when none is given.
pub const DEFAULT_SEED: u64 = 0x5eed_f00d;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent sub-seed for `stream` under `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}
