//! Seeded, splittable randomness.
//!
//! Every stochastic routine takes an explicit `u64` seed. Independent
//! sub-streams (operator, truth, noise, per-trial draws) are obtained with
//! [`stream_rng`], so changing one component never perturbs another.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type SenseRng = ChaCha8Rng;

/// Generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> SenseRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes `(seed, index)` into a fresh seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// `rows x cols` matrix of i.i.d. standard normals, filled column by column.
pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Uniform draw from the Frobenius ball of the given radius.
pub fn uniform_ball<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, radius: f64) -> DMatrix<f64> {
    let dir = gaussian_matrix(rng, rows, cols);
    let norm = dir.norm();
    if norm == 0.0 || radius == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let u: f64 = rng.random();
    let scale = radius * u.powf(1.0 / (rows * cols) as f64);
    dir * (scale / norm)
}
