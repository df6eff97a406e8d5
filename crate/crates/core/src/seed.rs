//! Deterministic seed derivation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a seed
//! derived from a master seed and a path of integer tags, so results depend
//! only on the configuration and never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `tags` into `master` to produce an independent child seed.
pub fn derive(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t.wrapping_add(0x51_7CC1_B727_220A)))
    })
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stream tags used by the pipeline stages.
pub mod tag {
    pub const SCM: u64 = 1;
    pub const DESIGN: u64 = 2;
    pub const SIMULATE: u64 = 3;
    pub const SAMPLING: u64 = 4;
    pub const LABELS: u64 = 5;
    pub const LEARNER: u64 = 6;
    pub const FOLDS: u64 = 7;
}
