//! Shared fixtures for the benchmarks.

use bora_core::measures::{sample_uniform_simplex, WeightVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn simplex_points(m: usize, n: usize, seed: u64) -> Vec<WeightVector> {
    let mut r = rng(seed);
    (0..n).map(|_| sample_uniform_simplex(m, &mut r).unwrap()).collect()
}

/// `n` weight vectors with noisy rewards of a smooth concave objective.
pub fn training_set(m: usize, n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng(seed);
    let inputs: Vec<Vec<f64>> = simplex_points(m, n, seed ^ 1).into_iter().map(WeightVector::into_inner).collect();
    let targets = inputs
        .iter()
        .map(|a| 1.0 - a.iter().map(|w| (w - 1.0 / m as f64).powi(2)).sum::<f64>() + 0.05 * r.random::<f64>())
        .collect();
    (inputs, targets)
}
