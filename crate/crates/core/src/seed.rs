//! Deterministic seed derivation for per-job random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random generator used throughout the crate.
pub type JobRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a job identity into a new seed.
///
/// Depends only on the values, never on call order, so parallel jobs get the
/// same streams regardless of scheduling.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng(seed: u64) -> JobRng {
    ChaCha8Rng::seed_from_u64(seed)
}
