//! Seed derivation helpers.
//!
//! Every stochastic component derives its stream from a master seed plus a
//! small tuple of indices, so results never depend on evaluation order or
//! thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used throughout the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with a stream index into a new, well-mixed seed.
pub fn mix(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ index.rotate_left(17) ^ 0xA076_1D64_78BD_642F)
}

/// Folds several indices into a seed, left to right.
pub fn mix_all(seed: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(seed, |acc, &i| mix(acc, i))
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
