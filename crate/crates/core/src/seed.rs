//! Seed derivation for repetitions and independent streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn splitmix64_finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `master`: `finalize(master ^ (index * golden_gamma))`.
pub fn mix(master: u64, index: u64) -> u64 {
    splitmix64_finalize(master ^ index.wrapping_mul(GOLDEN_GAMMA))
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
