//! Deterministic derivation of independent RNG streams from one user seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const STREAM_ACCOUNTS: u64 = 0x6163_636f_756e_7473;
pub(crate) const STREAM_TRANSACTIONS: u64 = 0x7472_616e_7361_6374;
pub(crate) const STREAM_CALIBRATION: u64 = 0x6361_6c69_6272_6174;
pub(crate) const STREAM_SPLIT: u64 = 0x7370_6c69_7400_0000;
pub(crate) const STREAM_INIT: u64 = 0x696e_6974_0000_0000;

/// SplitMix64 finalizer over `seed ^ stream`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = (seed ^ stream).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, stream))
}
