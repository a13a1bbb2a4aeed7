//! Counter-based seeding.
//!
//! Stream `i` of a run with base seed `s` is a xoshiro256++ generator seeded
//! with `splitmix64(s ^ i * 0x9E3779B97F4A7C15)`. Gaussian variates come from
//! `rand_distr::StandardNormal` (ziggurat). Both choices are pinned through
//! `Cargo.lock`; changing either changes every simulated path.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type StreamRng = Xoshiro256PlusPlus;

pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of stream `index` under `base_seed`.
pub fn stream_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed ^ index.wrapping_mul(GOLDEN_GAMMA))
}

pub fn stream_rng(base_seed: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(base_seed, index))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn splitmix_reference_values() {
        // First outputs of the reference splitmix64 generator seeded with 0.
        assert_eq!(splitmix64(0), 0xE220_A839_7B1D_CDAF);
        assert_eq!(splitmix64(GOLDEN_GAMMA), 0x6E78_9E6A_A1B9_65F4);
    }

    #[test]
    fn streams_are_distinct_and_reproducible() {
        let a: Vec<u64> = (0..100).map(|i| stream_seed(7, i)).collect();
        let mut sorted = a.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 100);
        assert_eq!(stream_rng(7, 3).next_u64(), stream_rng(7, 3).next_u64());
        assert_ne!(stream_seed(7, 0), stream_seed(8, 0));
    }
}
