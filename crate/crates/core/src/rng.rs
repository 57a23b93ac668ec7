//! Seeded random streams. Every stochastic operation derives its generator
//! from a user seed plus a fixed stream id, so runs are reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Generator for `(seed, stream)`. Distinct streams are independent.
pub fn seeded(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) mod streams {
    pub const PERTURB: u64 = 1;
    pub const SPLIT: u64 = 2;
    pub const NEGATIVES: u64 = 3;
    pub const NOISE: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const INIT: u64 = 6;
    pub const SAMPLER: u64 = 7;
    pub const ORDER_STAT: u64 = 8;
}
