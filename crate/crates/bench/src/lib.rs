//! Fixtures shared by the benchmarks.

use condact::harness::ExperimentConfig;
use condact::{Network, Result};
use ndarray::Array2;

pub const MNIST_INPUT: usize = 784;
pub const MNIST_CLASSES: usize = 10;

/// MNIST-shaped network, wired and initialized from `seed`.
pub fn mnist_network(
    layers: usize,
    neurons: usize,
    heterogeneous: bool,
    seed: u64,
) -> Result<Network<f32>> {
    let cfg = ExperimentConfig {
        layers,
        neurons,
        heterogeneous,
        ..Default::default()
    };
    condact::harness::build_network(&cfg, MNIST_INPUT, MNIST_CLASSES, seed)
}

/// Deterministic pixel-like batch in `[0, 1)` with labels cycling through the classes.
pub fn batch(rows: usize, cols: usize) -> (Array2<f32>, Vec<usize>) {
    let x = Array2::from_shape_fn((rows, cols), |(i, j)| {
        ((i * 31 + j * 17) % 256) as f32 / 256.0
    });
    let labels = (0..rows).map(|i| i % MNIST_CLASSES).collect();
    (x, labels)
}
