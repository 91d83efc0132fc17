//! Seed derivation. Every random stream in the crate is a `ChaCha8Rng`
//! seeded from a base seed and a purpose tag, so runs are reproducible and
//! streams used for different purposes never alias.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, tag: u64) -> u64 {
    mix(mix(base) ^ tag.rotate_left(17))
}

/// Derive a seed from a string tag.
pub fn derive_seed_str(base: u64, tag: &str) -> u64 {
    let tag = tag
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
    derive_seed(base, tag)
}

pub fn rng_for(base: u64, tag: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed_str(base, tag))
}
