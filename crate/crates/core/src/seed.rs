//! Deterministic RNG substreams.
//!
//! Every stochastic component derives its generator from the master seed, a
//! subsystem tag and an index (chunk, strand, read or trial). Results then do
//! not depend on how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Subsystem tags mixed into derived seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    MonteCarlo = 0x4d43,
    Pool = 0x504f,
    Origins = 0x4f52,
    Noise = 0x4e4f,
    Trial = 0x5452,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, tag: StreamTag, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ tag as u64) ^ index)
}

pub fn substream(master: u64, tag: StreamTag, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}
