//! Seed splitting. Every random stream in the crate is derived from one base
//! seed plus a stream label, so reruns with the same base seed are identical.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of a named sub-stream from `base`.
pub fn derive_seed(base: u64, stream: &str) -> u64 {
    // FNV-1a over the label, then mixed with the base.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stream.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ splitmix64(h))
}

/// Derives the seed of the `index`-th member of a numbered family of streams.
pub fn derive_indexed(base: u64, stream: &str, index: u64) -> u64 {
    splitmix64(derive_seed(base, stream).wrapping_add(splitmix64(index)))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
