//! Seeded substream derivation.
//!
//! Every random quantity in this crate is drawn from a ChaCha8 stream
//! addressed by a `(seed, index)` pair: the 64-bit seed keys the generator
//! and the index selects one of its 2^64 independent streams. Layer `i` of a
//! graph uses stream `i`, worker batch `b` of an estimator uses stream `b`,
//! and nested scopes (sweep point, trial) derive fresh 64-bit seeds with
//! [`derive_seed`]. The scheme makes every result a pure function of the
//! top-level seed, independent of thread count.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator identity pinned into config output.
pub const GENERATOR_ID: &str = "chacha8-stream-v1";

/// Stream `index` of the ChaCha8 generator keyed by `seed`.
pub fn substream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Derive a child seed for a nested scope (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
