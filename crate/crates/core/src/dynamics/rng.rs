//! Per-trajectory seeds.
//!
//! Trajectory `k` of an ensemble with base seed `b` uses
//! `seed_k = mix(mix(b) ^ (k * 0x9E3779B97F4A7C15))`, where `mix` is the
//! SplitMix64 finalizer. Each seed initializes a `ChaCha8Rng`; stream 0
//! feeds the dynamics and stream 1 the vacuum samples recorded while the
//! probe is off. A trajectory therefore depends only on `(b, k)`, never on
//! which worker runs it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    mix64(mix64(base_seed) ^ index.wrapping_mul(GOLDEN))
}

pub(crate) fn streams(seed: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let main = ChaCha8Rng::seed_from_u64(seed);
    let mut vacuum = main.clone();
    vacuum.set_stream(1);
    (main, vacuum)
}
