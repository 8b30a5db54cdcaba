//! Counter-based random streams.
//!
//! Every random draw in a run is addressed by `(seed, purpose, step, index)`,
//! so batches can be rebuilt in any order (or in parallel) and still match
//! bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    GeometryParams = 2,
    Integration = 3,
    Observation = 4,
    Evaluation = 5,
    Test = 6,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for one `(purpose, step, index)` cell of a run.
pub fn stream(seed: u64, purpose: Purpose, step: u64, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let id = splitmix(splitmix(splitmix(purpose as u64) ^ step) ^ index);
    rng.set_stream(id);
    rng
}
