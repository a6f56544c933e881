//! Counter-based seeding: every random quantity gets its own stream keyed by indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn mix(seed: u64, tags: &[u64]) -> u64 {
    tags.iter()
        .fold(splitmix64(seed), |h, &t| splitmix64(h ^ splitmix64(t)))
}

/// A generator whose output depends only on `seed` and `tags`.
pub(crate) fn stream_rng(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(seed, tags))
}

/// Uniform value in `[0, 1)` derived from `seed` and `tags`.
pub(crate) fn unit_hash(seed: u64, tags: &[u64]) -> f64 {
    (mix(seed, tags) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
