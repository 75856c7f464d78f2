//! Seeded random streams.
//!
//! Every stochastic quantity in the crate is drawn from xoshiro256++
//! whose 256-bit state is filled from a 64-bit seed by SplitMix64 (the
//! `seed_from_u64` rule of `rand_xoshiro`). Uniform doubles use the top
//! 53 bits of a draw, `(x >> 11) * 2^-53`.
//!
//! Independent sub-streams (trials, modes, noise) take the seed
//! [`sub_seed`]`(master, stream)`: the SplitMix64 output for the state
//! `master + (stream + 1) * 0x9E3779B97F4A7C15`.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type Rng = Xoshiro256PlusPlus;

/// Identifier recorded in reports.
pub const PRNG_NAME: &str = "xoshiro256++/splitmix64";

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn rng_from_seed(seed: u64) -> Rng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn sub_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Well-known stream labels, so that unrelated consumers never share draws.
pub(crate) mod streams {
    pub const NOISE: u64 = 0x4E4F_4953_4500_0000;
    pub const SCATTER: u64 = 0x5343_4154_5445_5200;
    pub const PROBE: u64 = 0x5052_4F42_4500_0000;
    pub const MODES: u64 = 0x4D4F_4445_5300_0000;
}
