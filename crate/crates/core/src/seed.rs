//! Seed derivation. Every random stream in the crate is a ChaCha8 generator
//! seeded from the run seed mixed with a stream tag and stream-local ids, so
//! streams never depend on scheduling or on each other.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags.
pub mod stream {
    pub const SPLIT: u64 = 0x5350_4c49;
    pub const SOLVER: u64 = 0x534f_4c56;
    pub const RAND_SELECT: u64 = 0x5241_4e44;
    pub const CLASS_SUBSET: u64 = 0x4353_5542;
    pub const SYNTHETIC: u64 = 0x5359_4e54;
    pub const CLASS_ORDER: u64 = 0x4f52_4452;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a stream tag and any number of ids.
pub fn derive(base: u64, tag: u64, ids: &[u64]) -> u64 {
    let mut h = splitmix64(base ^ splitmix64(tag));
    for &id in ids {
        h = splitmix64(h ^ id);
    }
    h
}

pub fn rng(base: u64, tag: u64, ids: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(base, tag, ids))
}
