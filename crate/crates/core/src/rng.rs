//! Seeding discipline.
//!
//! Everything stochastic in this crate is driven by a ChaCha8 generator with
//! an explicit 64-bit seed. Independent parts of one computation (design
//! matrix vs. noise, folds vs. solver, one method vs. another) draw from
//! separate streams of the same seed so that changing one consumer's draw
//! count never perturbs another's.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Fixed stream ids; see [`stream`].
pub mod streams {
    pub const DESIGN: u64 = 0;
    pub const NOISE: u64 = 1;
    pub const TEST_DESIGN: u64 = 2;
    pub const TEST_NOISE: u64 = 3;
    pub const SAMPLER: u64 = 4;
    pub const FOLDS: u64 = 5;
}

/// Generator for one (seed, stream) pair.
pub fn stream(seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

/// Derive a child seed from a parent seed and a label, so harness-level
/// consumers (per-method samplers, per-replicate datasets) get independent
/// yet reproducible randomness. SplitMix64 finalizer over a label hash.
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325; // FNV-1a
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = parent ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
