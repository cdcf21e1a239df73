//! Seed derivation.
//!
//! A global seed fans out into independent sub-seeds with the SplitMix64
//! finalizer: `sub_seed(global, stream) = mix(global + (stream + 1) * GOLDEN)`.
//! Each consumer owns a fixed stream id, so adding a consumer never shifts
//! the randomness seen by the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn sub_seed(global: u64, stream: u64) -> u64 {
    splitmix64(global.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Fixed stream ids.
pub mod stream {
    pub const TRAIN_DATA: u64 = 1;
    pub const TEST_DATA: u64 = 2;
    pub const TRAIN: u64 = 3;
    pub const SPLIT: u64 = 4;
    pub const UNLEARN: u64 = 5;
    pub const RETRAIN: u64 = 6;
    pub const FINETUNE: u64 = 7;
    pub const SISA: u64 = 8;
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
