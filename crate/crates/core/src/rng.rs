//! Seeded random streams. All randomness in the crate flows through here so a
//! run is a pure function of its seeds.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Independent stream `stream` of the generator seeded with `seed`.
pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream `stream` of a generator keyed by `(seed, index)`, e.g. one per
/// training step or epoch, so draws never depend on how many came before.
pub fn indexed(seed: u64, index: u64, stream: u64) -> ChaCha8Rng {
    let mixed = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15).rotate_left(17);
    self::stream(mixed, stream)
}

pub fn standard_normal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Well-known stream ids so different consumers never share draws.
pub mod streams {
    pub const INIT: u64 = 1;
    pub const SHUFFLE: u64 = 2;
    pub const NOISE: u64 = 3;
    pub const WINDOW: u64 = 4;
    pub const SYNTH: u64 = 5;
    pub const EVAL: u64 = 6;
}
