//! Deterministic seed derivation.
//!
//! Every random stream in the crate is derived from one base seed plus a
//! named tag and a list of indices, so experiments can be replayed exactly
//! and paired runs can share streams on purpose.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base`, a stream tag and indices.
pub fn derive_seed(base: u64, tag: &str, indices: &[u64]) -> u64 {
    let mut h = mix64(base);
    for b in tag.bytes() {
        h = mix64(h ^ u64::from(b));
    }
    for &i in indices {
        h = mix64(h ^ mix64(i.wrapping_add(0xA5A5_A5A5)));
    }
    h
}

/// Creates the crate's standard RNG for a derived stream.
pub fn stream(base: u64, tag: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, tag, indices))
}
