//! Named, splittable random streams.
//!
//! Every consumer of randomness derives its own generator from a key path
//! such as `seed / CD / epoch / instance`. Results therefore do not depend
//! on how work is distributed over threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used across the crate.
pub mod tag {
    pub const INIT: u64 = 0x494e_4954;
    pub const SHUFFLE: u64 = 0x5348_5546;
    pub const CD: u64 = 0x4344;
    pub const MASK: u64 = 0x4d41_534b;
    pub const SPLIT: u64 = 0x5350_4c54;
    pub const SYNTH: u64 = 0x5359_4e54;
    pub const PLANT: u64 = 0x504c_4e54;
    pub const LABELS: u64 = 0x4c41_424c;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngKey(u64);

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngKey {
    pub fn new(seed: u64) -> Self {
        RngKey(splitmix(seed))
    }

    pub fn child(self, tag: u64) -> Self {
        RngKey(splitmix(self.0 ^ splitmix(tag.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, tags: &[u64]) -> Self {
        tags.iter().fold(self, |k, &t| k.child(t))
    }

    pub fn rng(self) -> Rng {
        Rng::seed_from_u64(self.0)
    }
}
