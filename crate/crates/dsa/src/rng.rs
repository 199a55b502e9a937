//! Deterministic seed splitting.
//!
//! Every randomized routine takes a `u64` seed and derives per-task streams
//! with [`split`], so results are reproducible regardless of thread
//! scheduling: replicate k always runs on the stream `split(seed, k)`.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; decorrelates consecutive stream ids.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the RNG for sub-stream `stream` of `seed`.
pub fn split(seed: u64, stream: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix(seed ^ mix(stream)))
}

/// Root RNG for a seed (stream 0).
pub fn root(seed: u64) -> ChaCha12Rng {
    split(seed, 0)
}
