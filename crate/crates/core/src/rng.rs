//! Seed derivation for reproducible experiments.
//!
//! Every random operator gets its own ChaCha8 stream, seeded from a 64-bit
//! value obtained by mixing `(master_seed, trial, tag)` with SplitMix64. The
//! ChaCha stream is portable and versioned by `rand_chacha`, so a given
//! configuration produces the same data on every platform.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Operator tags. Changing any of these changes every generated dataset.
pub mod tag {
    pub const SUBSPACES: u64 = 0x5355_4253;
    pub const PIXELS: u64 = 0x5049_5845;
    pub const BLOCKS: u64 = 0x424c_4f43;
    pub const ROWS: u64 = 0x524f_5753;
    pub const TEXTURE: u64 = 0x5445_5854;
    pub const KMEANS: u64 = 0x4b4d_4541;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, trial: u64, tag: u64) -> u64 {
    let a = splitmix64(master);
    let b = splitmix64(a ^ trial.rotate_left(17));
    splitmix64(b ^ tag.rotate_left(41))
}

pub fn stream(master: u64, trial: u64, tag: u64) -> Rng {
    Rng::seed_from_u64(derive_seed(master, trial, tag))
}
