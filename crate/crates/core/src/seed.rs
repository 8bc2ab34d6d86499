//! Seed derivation. Every random stream in an experiment is keyed by the
//! tuple that identifies its work item, so results do not depend on which
//! worker runs what or in which order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(base), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn rng_for(base: u64, parts: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(base, parts))
}

/// Stream tags so that streams for different purposes never collide.
pub mod tag {
    pub const RUN: u64 = 1;
    pub const STM: u64 = 2;
    pub const CORRUPT: u64 = 3;
    pub const FASTNN: u64 = 4;
    pub const INSTANCE_CLASSES: u64 = 5;
}
