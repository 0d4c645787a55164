//! Synthetic training data for `f(x, y) = (√(xy), ⁴√(xy))`, seed streams,
//! and initial weights.
//!
//! Random numbers come from xoshiro256** seeded through SplitMix64 (the
//! `rand_xoshiro` `seed_from_u64` path: the four state words are the first
//! four SplitMix64 outputs). A uniform draw in `[0, 1)` is
//! `(next_u64() >> 11) * 2^-53`. Out-of-process workers reproduce the same
//! streams from these two rules alone.

use alloc::vec::Vec;

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::ann::{ModelWeights, Sample, WEIGHT_COUNT};

/// The generator every data and selection stream uses.
pub type DataRng = Xoshiro256StarStar;

/// Seed for one random stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub struct DataSeed(pub u64);

impl DataSeed {
    pub fn rng(self) -> DataRng {
        DataRng::seed_from_u64(self.0)
    }
}

/// Stream id of the server's subset selection.
pub const STREAM_SELECTION: u64 = 0;
/// Stream id of the held-out evaluation batch.
pub const STREAM_EVALUATION: u64 = 1;
/// Client `j` draws from stream `STREAM_CLIENT_BASE + j`.
pub const STREAM_CLIENT_BASE: u64 = 1 << 32;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the seed of stream `stream` of a run seeded with `run_seed`:
/// `mix64(run_seed ^ mix64(stream + 0x9E3779B97F4A7C15))`.
pub fn derive_seed(run_seed: u64, stream: u64) -> DataSeed {
    DataSeed(mix64(run_seed ^ mix64(stream.wrapping_add(GOLDEN_GAMMA))))
}

/// Seed of client `client_id`'s private data stream.
pub fn client_seed(run_seed: u64, client_id: u32) -> DataSeed {
    derive_seed(run_seed, STREAM_CLIENT_BASE + u64::from(client_id))
}

/// Uniform draw in `[0, 1)` with 53 random bits.
#[inline]
pub fn unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in the open interval `(0, 1)`.
#[inline]
pub fn open_unit_f64<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// The target function. The fourth root is taken as `√(√(xy))`, which every
/// IEEE-754 implementation rounds identically.
#[inline]
pub fn target_of(x: f64, y: f64) -> [f64; 2] {
    let root = sqrt(x * y);
    [root, sqrt(root)]
}

#[cfg(feature = "std")]
#[inline]
fn sqrt(v: f64) -> f64 {
    v.sqrt()
}

#[cfg(not(feature = "std"))]
#[inline]
fn sqrt(v: f64) -> f64 {
    libm::sqrt(v)
}

/// Draws `x` then `y` uniformly from `[0, 1)`.
pub fn gen_sample<R: RngCore + ?Sized>(rng: &mut R) -> Sample {
    let x = unit_f64(rng);
    let y = unit_f64(rng);
    Sample::new([x, y], target_of(x, y))
}

pub fn gen_batch<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> Vec<Sample> {
    (0..n).map(|_| gen_sample(rng)).collect()
}

/// Repository-chosen starting weights, evenly spaced from −0.40 to 0.40 in
/// steps of 0.05 over the canonical order. These are not taken from any
/// published experiment.
pub const FIXED_WEIGHTS: [f64; WEIGHT_COUNT] = [
    -0.40, -0.35, -0.30, -0.25, -0.20, -0.15, -0.10, -0.05, 0.00, 0.05, 0.10, 0.15, 0.20, 0.25,
    0.30, 0.35, 0.40,
];

/// How to obtain the starting model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum InitialWeights {
    #[default]
    Fixed,
    /// Every weight drawn from `(−0.5, 0.5)` in canonical order.
    Seeded(u64),
}

pub fn initial_weights(spec: InitialWeights) -> ModelWeights {
    match spec {
        InitialWeights::Fixed => ModelWeights::from_flat(&FIXED_WEIGHTS),
        InitialWeights::Seeded(seed) => {
            let mut rng = DataSeed(seed).rng();
            let flat: [f64; WEIGHT_COUNT] = core::array::from_fn(|_| open_unit_f64(&mut rng) - 0.5);
            ModelWeights::from_flat(&flat)
        }
    }
}
