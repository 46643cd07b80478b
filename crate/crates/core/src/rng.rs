//! Counter-based random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream selected by
//! `(master seed, domain tag, counter)`, so results do not depend on how work
//! is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub mod domain {
    pub const PRIOR: u64 = 1;
    pub const PROPOSAL: u64 = 2;
    pub const POSTERIOR: u64 = 3;
    pub const PLATOON_TYPES: u64 = 4;
    pub const PLATOON_THETA: u64 = 5;
    pub const SPLIT: u64 = 6;
    pub const SYNTHETIC: u64 = 7;
    pub const JSD: u64 = 8;
    pub const PAD: u64 = 9;
    pub const GROUP: u64 = 10;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream for `(seed, domain, major, minor)`; `major` and `minor` are packed
/// into the 64-bit ChaCha stream id.
pub fn substream(seed: u64, domain: u64, major: u64, minor: u64) -> ChaCha8Rng {
    let key = splitmix64(seed ^ splitmix64(domain));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream((major << 32) ^ minor);
    rng
}

/// Seed for an independent sub-experiment, such as one calibration group.
pub fn derived_seed(seed: u64, domain: u64, index: u64) -> u64 {
    use rand::RngCore;
    substream(seed, domain, index, 0).next_u64()
}
