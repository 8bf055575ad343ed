use ndarray::Array2;
use rand::Rng;

use super::Dataset;
use crate::rng::{self, Domain};

/// Minimum distance of every synthetic coordinate from zero.
pub const SYNTHETIC_MARGIN: f32 = 0.1;

/// Two-feature, two-class coincidence task. Each coordinate has a random
/// sign and a magnitude in `[SYNTHETIC_MARGIN, 1)`; the label is 1 exactly
/// when both coordinates are positive.
pub fn synthetic_sync_dataset(n: usize, seed: u64) -> Dataset {
    let mut rng = rng::stream(seed, Domain::Synthetic, 0);
    let mut features = Array2::zeros((n, 2));
    let mut labels = Vec::with_capacity(n);
    for mut row in features.rows_mut() {
        for v in row.iter_mut() {
            let magnitude = rng.random_range(SYNTHETIC_MARGIN..1.0);
            *v = if rng.random_bool(0.5) {
                magnitude
            } else {
                -magnitude
            };
        }
        labels.push(usize::from(row[0] > 0.0 && row[1] > 0.0));
    }
    Dataset::new(features, labels, 2).expect("labels are 0 or 1")
}
