//! Seed derivation.
//!
//! Every random stream in the lab is derived from a master seed through a
//! splittable counter scheme: `derive(parent, stream, index)` mixes the parent
//! seed, a stream tag and a counter with SplitMix64. Streams used:
//!
//! | tag          | parent          | index            |
//! |--------------|-----------------|------------------|
//! | `INIT`       | master          | 0                |
//! | `ITERATION`  | master          | iteration number |
//! | `GAME`       | iteration seed  | game number      |
//! | `OPTIMIZE`   | iteration seed  | 0                |
//! | `ENV`/`SEARCH` | game seed     | 0                |
//! | `CELL`       | master          | hash of variant id |
//!
//! Seeds depend only on coordinates, never on execution order, so parallel
//! self-play and concurrent sweep cells stay reproducible.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT: u64 = 0x494e_4954;
pub const ITERATION: u64 = 0x4954_4552;
pub const GAME: u64 = 0x4741_4d45;
pub const OPTIMIZE: u64 = 0x4f50_5449;
pub const ENV: u64 = 0x454e_5600;
pub const SEARCH: u64 = 0x5345_4152;
pub const CELL: u64 = 0x4345_4c4c;
pub const EVAL: u64 = 0x4556_414c;

/// One SplitMix64 output step.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(parent ^ splitmix64(stream)).wrapping_add(index))
}

/// Stable 64-bit FNV-1a, used for hashing variant ids and catalogs.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
