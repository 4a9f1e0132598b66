//! Named RNG streams. Every (purpose, node, round) triple gets its own
//! ChaCha stream so execution order never changes a trajectory.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream purposes. Kept as constants so two subsystems never collide.
pub mod purpose {
    pub const PARTITION: u64 = 1;
    pub const TRAIN: u64 = 2;
    pub const OFFLOAD: u64 = 3;
    pub const CPU: u64 = 4;
    pub const DATA: u64 = 5;
    pub const PROBE: u64 = 6;
    pub const PLACEMENT: u64 = 7;
}

/// SplitMix64 finaliser; used to fold several keys into one seed.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(seed: u64, purpose: u64, node: u64, round: u64) -> u64 {
    mix(mix(mix(seed ^ purpose.rotate_left(17)) ^ node.rotate_left(31)) ^ round)
}

pub fn stream(seed: u64, purpose: u64, node: u64, round: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, purpose, node, round))
}
