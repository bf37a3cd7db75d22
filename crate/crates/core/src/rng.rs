//! Seed derivation for independent random streams.
//!
//! Every random draw in a run comes from a stream keyed by
//! `(run_seed, round, purpose)`, so adding a consumer never shifts the draws
//! seen by another one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Init,
    SeedSet,
    Shuffle,
    Replay,
    Acquisition,
    Data,
}

impl Purpose {
    fn tag(self) -> u64 {
        match self {
            Purpose::Init => 0x1001,
            Purpose::SeedSet => 0x1002,
            Purpose::Shuffle => 0x1003,
            Purpose::Replay => 0x1004,
            Purpose::Acquisition => 0x1005,
            Purpose::Data => 0x1006,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes the three keys into one 64-bit seed.
pub fn derive_seed(run_seed: u64, round: usize, purpose: Purpose) -> u64 {
    let a = splitmix64(run_seed);
    let b = splitmix64(a ^ (round as u64).wrapping_mul(0xd6e8_feb8_6659_fd93));
    splitmix64(b ^ purpose.tag())
}

pub fn stream(run_seed: u64, round: usize, purpose: Purpose) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(run_seed, round, purpose))
}

pub fn seeded(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
