//! Per-seed random streams.
//!
//! A run seed `s` with offset `o` becomes the 64-bit value
//! `splitmix64(s + o)` (wrapping add), which seeds a `ChaCha8Rng` through
//! `seed_from_u64`. The derived value is written to the run manifest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// One step of the SplitMix64 generator applied to `x`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, offset: u64) -> u64 {
    splitmix64(seed.wrapping_add(offset))
}

pub fn seed_rng(seed: u64, offset: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, offset))
}
