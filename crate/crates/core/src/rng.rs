//! Seeding conventions.
//!
//! Every random draw in the crate comes from `ChaCha8Rng` seeded with a
//! 64-bit value. Experiments derive one seed per trial (and per stream inside
//! a trial) with a SplitMix64 mix of the parent seed and an index, so any row
//! of a report can be replayed from its logged seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed number `index` of `parent`.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}
