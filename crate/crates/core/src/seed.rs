//! Deterministic seed derivation.
//!
//! Every randomized step draws from a ChaCha stream whose seed is a hash of
//! the master seed and a tuple of integer tags (operating condition id,
//! contingency id, run index, ...). Results therefore do not depend on
//! thread scheduling or on the order in which cases are processed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hashes `master` together with `tags` into a new 64-bit seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(master);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t.wrapping_add(GOLDEN)));
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, tags: &[u64]) -> ChaCha8Rng {
    rng(derive(master, tags))
}

/// Stream identifiers so that different pipeline stages never share draws.
pub mod stream {
    pub const OPERATING_CONDITIONS: u64 = 1;
    pub const CONTINGENCIES: u64 = 2;
    pub const SOLAR: u64 = 3;
    pub const MEASUREMENT_ERROR: u64 = 4;
    pub const SPLIT: u64 = 5;
    pub const TRAINING: u64 = 6;
    pub const FOLDS: u64 = 7;
}
