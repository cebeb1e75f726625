//! Per-walker random streams.
//!
//! Every walker owns a ChaCha8 generator keyed by `(master seed, purpose)`
//! and positioned on stream `walker id`, so draws do not depend on the order
//! in which walkers are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream family used for drawing initial positions.
pub const PURPOSE_INIT: u64 = 1;
/// Stream family used for dynamical increments.
pub const PURPOSE_DYNAMICS: u64 = 2;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn walker_rng(master: u64, purpose: u64, walker: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master ^ splitmix64(purpose));
    rng.set_stream(walker);
    rng
}

pub fn walker_rngs(master: u64, purpose: u64, count: usize) -> Vec<ChaCha8Rng> {
    (0..count as u64).map(|w| walker_rng(master, purpose, w)).collect()
}
