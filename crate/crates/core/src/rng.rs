//! Seed derivation. Every stochastic component draws from a ChaCha stream
//! whose seed is a pure function of the experiment seed and a stream label,
//! so reruns are bit-identical regardless of scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent child seed from `base` and a stream index.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    mix(mix(base) ^ stream.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(base: u64, stream: u64) -> SimRng {
    rng_from_seed(derive_seed(base, stream))
}
