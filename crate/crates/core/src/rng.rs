//! Seeded random number generation shared by every randomized operation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in split provenance so a split can be regenerated elsewhere.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng/seed_from_u64";

pub type SplitRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SplitRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derive an independent stream seed, e.g. one per active-learning step.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
