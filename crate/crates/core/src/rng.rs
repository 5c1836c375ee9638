//! Reproducible random streams.
//!
//! All randomness comes from ChaCha8 keyed by a 64-bit seed (expanded with
//! `SeedableRng::seed_from_u64`, i.e. PCG32 key expansion). Independent
//! streams are obtained from the same key by selecting the ChaCha stream id,
//! so a draw depends only on `(seed, stream)` and never on scheduling.
//! Gaussian variates use `rand_distr::StandardNormal` (ziggurat), which is
//! value-stable across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Generator for the base stream of `seed`.
pub fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for stream `stream` of `seed`. Stream 0 equals [`rng_for`].
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream id for sample `sample` of sweep level `level`.
///
/// Levels occupy the upper 24 bits and samples the lower 40, so up to
/// 2^40 samples per level never collide.
pub fn split_stream(level: usize, sample: usize) -> u64 {
    debug_assert!((sample as u64) < (1 << 40));
    ((level as u64 + 1) << 40) | sample as u64
}

pub fn standard_normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    StandardNormal.sample_iter(rng).take(n).collect()
}
