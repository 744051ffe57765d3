//! Seeded randomness.
//!
//! All randomness flows through [`Xoshiro256PlusPlus`] seeded with
//! `seed_from_u64`, which expands the 64-bit seed with SplitMix64. Sub-streams
//! are derived from a parent seed and a textual label with [`derive_seed`] so
//! that independent components (weight blocks, data chunks, shuffles) never
//! share a stream and never depend on the order in which they are created.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `parent` and a label (FNV-1a over the label,
/// mixed with the parent through SplitMix64).
pub fn derive_seed(parent: u64, label: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    splitmix64(splitmix64(parent) ^ h)
}

pub fn rng_from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

pub fn derived_rng(parent: u64, label: &str) -> Rng {
    rng_from_seed(derive_seed(parent, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_seeds_differ_by_label() {
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(derive_seed(9, "trunk/0"), derive_seed(9, "trunk/0"));
    }

    #[test]
    fn stream_is_pinned() {
        // Guards against a silent change of generator algorithm.
        let mut rng = rng_from_seed(42);
        let first: u64 = rng.random();
        let mut again = rng_from_seed(42);
        assert_eq!(first, again.random::<u64>());
        assert_eq!(derive_seed(0, ""), splitmix64(splitmix64(0) ^ FNV_OFFSET));
    }
}
