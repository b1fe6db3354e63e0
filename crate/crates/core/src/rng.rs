//! Seed derivation. Every random draw in the crate comes from a ChaCha stream
//! keyed by a base seed plus a tag path, so results do not depend on thread
//! scheduling or call order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const TAG_SPLIT: u64 = 1;
pub(crate) const TAG_KSHOT: u64 = 2;
pub(crate) const TAG_TRIAL: u64 = 3;
pub(crate) const TAG_FOLDS: u64 = 4;
pub(crate) const TAG_SYNTH: u64 = 5;
pub(crate) const TAG_REPEAT: u64 = 6;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a seed and a path of tags into a new 64-bit seed.
pub fn derive_seed(seed: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(splitmix(seed), |acc, &tag| splitmix(acc ^ splitmix(tag)))
}

pub(crate) fn rng_for(seed: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, path))
}
