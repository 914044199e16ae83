//! Deterministic random streams.
//!
//! A run owns one master seed. Independent consumers (parameter init,
//! exploration noise, replay sampling, task draws, ...) each get their own
//! ChaCha stream of that seed, so adding draws in one consumer never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Well-known stream ids.
pub mod streams {
    pub const TOPOLOGY: u64 = 1;
    pub const INIT: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const TRAIN_TASKS: u64 = 5;
    pub const EVAL_TASKS: u64 = 6;
    pub const POLICY: u64 = 7;
}

pub fn stream(seed: u64, id: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Derives a child seed, e.g. one per episode or per sweep member.
pub fn child_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = seed ^ index.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
