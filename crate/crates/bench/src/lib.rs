//! Fixtures shared by the kernel benchmarks.

use clwe_core::embedio::normalize_rows;
use clwe_core::linalg::gaussian_matrix;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// `rows×dim` matrix of unit-norm Gaussian rows.
pub fn unit_rows(rows: usize, dim: usize, seed: u64) -> Array2<f64> {
    let mut m = gaussian_matrix(rows, dim, &mut ChaCha8Rng::seed_from_u64(seed));
    normalize_rows(&mut m);
    m
}
