//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! `u64` seed. Independent consumers of the same seed are separated with
//! ChaCha's 64-bit stream id: the top 16 bits name the purpose (fold draws,
//! noise, ...) and the low 48 bits carry an index such as a retry counter.
//! Results are therefore identical across platforms and thread schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Folds = 1,
    Noise = 2,
    Design = 3,
    Candidates = 4,
}

const INDEX_BITS: u32 = 48;

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> StreamRng {
    debug_assert!(index < (1 << INDEX_BITS));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << INDEX_BITS) | index);
    rng
}

/// SplitMix64 finalizer of `seed` and `index`; used to give each Monte-Carlo
/// replication its own master seed.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
