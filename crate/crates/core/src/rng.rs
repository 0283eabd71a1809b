//! Seeding scheme.
//!
//! All randomness flows through [`ChaCha8Rng`], which produces the same
//! stream on every platform. Child streams are derived by mixing a parent
//! seed with a stream label and an index through SplitMix64, so instance
//! `k` of a corpus never depends on how many instances came before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream labels keep the per-purpose child seeds disjoint.
pub mod stream {
    pub const GRAPH: u64 = 0x6772_6170_6800_0001;
    pub const MECHANISM: u64 = 0x6d65_6368_0000_0002;
    pub const SIMULATION: u64 = 0x7369_6d75_6c00_0003;
    pub const PADDING: u64 = 0x7061_6464_0000_0004;
    pub const BOOTSTRAP: u64 = 0x626f_6f74_0000_0005;
    pub const TRAINING: u64 = 0x7472_6169_6e00_0006;
    pub const MIXTURE: u64 = 0x6d69_7800_0000_0007;
    pub const INSTANCE: u64 = 0x696e_7374_0000_0008;
}

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives the seed of child stream `index` under `label`.
pub fn derive(seed: u64, label: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed ^ label) ^ index)
}

pub fn rng_from(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn child_rng(seed: u64, label: u64, index: u64) -> Rng {
    rng_from(derive(seed, label, index))
}

/// A fresh seed from the operating system, for runs that opt out of
/// reproducibility.
pub fn entropy_seed() -> u64 {
    rand::random()
}
