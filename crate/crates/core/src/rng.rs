//! Seeded random streams.
//!
//! Every stochastic component draws from a [`ChaCha8Rng`]. Substreams are
//! derived from a base seed by folding a sequence of integer labels through
//! the SplitMix64 finaliser, so `(seed, labels)` always maps to the same
//! stream on every platform. The ChaCha8 generator is fully specified, which
//! keeps trajectories reproducible by other implementations as well.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type Rng = ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 output function.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a substream seed from a base seed and a path of labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(splitmix64(seed), |acc, &label| splitmix64(acc ^ splitmix64(label)))
}

pub fn stream(seed: u64, labels: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, labels))
}

/// Labels for the independent purposes a trial draws randomness for.
pub mod purpose {
    pub const ENVIRONMENT: u64 = 1;
    pub const SIGNAL: u64 = 2;
    pub const NOISE_FEATURES: u64 = 3;
    pub const NOISE_MASK: u64 = 4;
}
