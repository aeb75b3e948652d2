//! Shared fixtures for the criterion benchmarks.

use nalgebra::DMatrix;
use senselab::rng::{gaussian_matrix, stream_rng};
use senselab::{generate_instance, InstanceSpec, NoiseModel, ProblemInstance};

/// A noisy instance together with a point near its ground truth.
pub fn fixture(n: usize, m: usize, r: usize, r_star: usize, seed: u64) -> (ProblemInstance, DMatrix<f64>) {
    let inst = generate_instance(&InstanceSpec::new(n, m, r, r_star, NoiseModel::Gaussian { sigma: 0.01 }, seed))
        .expect("benchmark sizes are valid");
    let x = inst.truth().padded_factor(r).expect("r >= r_star") + gaussian_matrix(&mut stream_rng(seed, 9), n, r) * 0.1;
    (inst, x)
}

/// `(n, m, r, r*)` cases: one on the Gram path, one on the direct path.
pub const CASES: [(usize, usize, usize, usize); 2] = [(20, 480, 6, 2), (40, 300, 4, 2)];
