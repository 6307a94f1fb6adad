//! Seeded, index-keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream whose seed is
//! derived from `(seed, stream tag, index)` with the splitmix64 finalizer, so
//! results never depend on iteration order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A stream keyed by seed and tag.
pub fn stream(seed: u64, tag: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(seed) ^ tag))
}

/// A stream keyed by seed, tag and item index.
pub fn indexed_stream(seed: u64, tag: u64, index: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(mix64(mix64(mix64(seed) ^ tag) ^ index))
}

/// Stream tags used across the crate.
pub mod tags {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SUBSAMPLE: u64 = 0x5355_4253;
    pub const DIRECTION: u64 = 0x4449_5245;
    pub const FEATURES: u64 = 0x4645_4154;
    pub const FLIP: u64 = 0x464c_4950;
    pub const INIT: u64 = 0x494e_4954;
    pub const SAMPLER: u64 = 0x5341_4d50;
}
