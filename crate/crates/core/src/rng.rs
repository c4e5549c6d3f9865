//! Seed discipline.
//!
//! Every random quantity in the crate is derived from a 64-bit seed through
//! [`mix64`], a stateless avalanche mix (the SplitMix64 finaliser applied to a
//! golden-ratio offset). Seeds fan out as `child = mix_pair(parent, index)`, so
//! any cell of an experiment can be recomputed in isolation.
//!
//! Trajectories draw from a ChaCha8 generator keyed by their seed, with one
//! ChaCha stream per purpose (see [`Stream`]). Changing what one stream is used
//! for never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finaliser of `x + GOLDEN`.
#[inline]
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the seed of child `index` of `parent`.
#[inline]
pub fn mix_pair(parent: u64, index: u64) -> u64 {
    mix64(mix64(parent) ^ index.wrapping_mul(GOLDEN).rotate_left(17))
}

/// Map a 64-bit hash to a uniform in the open interval (0, 1).
///
/// Uses the top 52 bits: `((h >> 12) + 0.5) / 2^52`, which is exactly
/// representable and never 0 or 1.
#[inline]
pub fn open_unit(h: u64) -> f64 {
    ((h >> 12) as f64 + 0.5) * (1.0 / (1u64 << 52) as f64)
}

/// Purpose-specific sub-streams of a trajectory seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Holding = 0,
    Direction = 1,
    Marks = 2,
    Subordinator = 3,
    Brownian = 4,
    Auxiliary = 5,
}

/// Counter-based generator for `(seed, stream)`.
pub fn stream(seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}
