//! Hierarchical seed tree.
//!
//! Every random stream in an experiment is reached from a single base seed by
//! a path of labels (`base -> evaluation -> trial -> robot`). Children are
//! derived by hashing, so adding siblings never perturbs existing streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of child `label` under `parent`.
#[inline]
pub fn derive(parent: u64, label: u64) -> u64 {
    mix(mix(parent) ^ label.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Seed of a child addressed by a string label, for named sub-streams.
pub fn derive_named(parent: u64, label: &str) -> u64 {
    // FNV-1a
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(parent, h)
}

pub fn rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
