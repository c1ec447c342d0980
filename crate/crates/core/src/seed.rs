//! Splittable seeding: every (master seed, path...) maps to an independent
//! 64-bit stream seed, so results never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finaliser.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed derived from `master` and a path of indices.
pub fn derive(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(master), |acc, &i| mix64(acc ^ mix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn rng_for(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(master, path))
}
