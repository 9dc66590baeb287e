//! Seed derivation and random-stream construction.
//!
//! All randomness flows through explicitly seeded ChaCha8 streams. A master
//! seed fans out to per-agent, per-run, and per-trajectory streams through a
//! counter-based SplitMix64 derivation, so results are independent of thread
//! scheduling and identical across re-runs.

use rand_chacha::ChaCha8Rng;
use rand::{Rng, SeedableRng};

/// Derivation-path labels. Keeping them distinct prevents accidental stream
/// collisions between subsystems.
pub mod ctx {
    pub const INSTANCE: u64 = 0x01;
    pub const INIT: u64 = 0x02;
    pub const TRAJECTORY: u64 = 0x03;
    pub const EVAL: u64 = 0x04;
    pub const SHUFFLE: u64 = 0x05;
    pub const AGENT: u64 = 0x06;
    pub const PARAMS: u64 = 0x07;
    pub const TUNE: u64 = 0x08;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a master seed and a path of labels/indices.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p));
    }
    s
}

/// Builds the ChaCha8 stream for a derivation path.
pub fn stream(master: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Uniform sample on the open interval (0, 1).
///
/// 53 random mantissa bits offset by half an ulp, so neither endpoint is
/// reachable. Exactly one `u64` is consumed per call.
pub fn open_unit(rng: &mut impl Rng) -> f64 {
    let bits: u64 = rng.random();
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}
