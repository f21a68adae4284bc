//! Deterministic RNG streams.
//!
//! Every random stage draws from a ChaCha8 stream whose seed is derived from a
//! master seed and a tuple of indices (cell, replicate, stage tag). Appending
//! cells to a sweep plan never shifts the streams of existing cells.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stage tags mixed into derived seeds.
pub mod stage {
    pub const GRAPH: u64 = 0x01;
    pub const CORRUPT: u64 = 0x02;
    pub const MONOTONE: u64 = 0x03;
    pub const INIT: u64 = 0x04;
    pub const KMEANS: u64 = 0x05;
    pub const BOOST: u64 = 0x06;
    pub const FLIP: u64 = 0x07;
    pub const VERIFY: u64 = 0x08;
    pub const SEED_LABELS: u64 = 0x09;
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds `parts` into `master` one word at a time: `h <- mix64(h ^ mix64(part))`.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(mix64(master), |h, &p| mix64(h ^ mix64(p)))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, parts: &[u64]) -> Rng {
    rng_from_seed(derive_seed(master, parts))
}
