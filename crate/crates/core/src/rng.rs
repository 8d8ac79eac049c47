//! Seed splitting and dummy generation.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by
//! [`split_seed`]`(master, stream)`. ChaCha is counter based, so a stream's
//! output depends only on its key, never on which thread consumed it or in
//! what order.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Stream used for bootstrap resampling so it never collides with the
/// per-experiment streams `0..K`.
pub const BOOTSTRAP_STREAM: u64 = 0xB007_57A9_0000_0000;

/// First of the streams used by the simulator, kept apart from experiment
/// and bootstrap streams so simulated predictors never reuse a dummy stream.
pub const SIMULATION_STREAM: u64 = 0x5133_D474_0000_0000;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of sub-stream `stream` from `master`: the
/// `(stream + 1)`-th output of a SplitMix64 sequence whose state starts at
/// `splitmix64(master)`. Unlike a symmetric combination of the two
/// arguments, distinct small `(master, stream)` pairs cannot cancel out.
pub fn split_seed(master: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master).wrapping_add(stream.wrapping_mul(GOLDEN_GAMMA)))
}

pub fn stream_rng(master: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(master, stream))
}

/// An `n x l` matrix of i.i.d. standard normal draws, filled column by column.
pub fn generate_dummies(n: usize, l: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DMatrix::from_iterator(n, l, (0..n * l).map(|_| StandardNormal.sample(&mut rng)))
}
