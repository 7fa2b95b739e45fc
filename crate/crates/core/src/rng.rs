//! Named random streams. Every consumer derives its generator from
//! `(seed, tag, a, b)`, so results do not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const SYNTH_SWEEP: u64 = 2;
pub const RIG_FRAME: u64 = 3;
pub const PRETRAIN_INIT: u64 = 4;
pub const PRETRAIN_STEP: u64 = 5;
pub const GRADCHECK: u64 = 6;

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for stream `tag` at coordinates `(a, b)` under `seed`.
pub fn stream(seed: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed ^ mix(tag)) ^ a) ^ b))
}
