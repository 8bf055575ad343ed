//! Datasets: MNIST ingestion, seeded mini-batching and a synthetic
//! coincidence task.

mod idx;
mod synthetic;

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{self, Domain};

pub use idx::{
    encode_idx_images, encode_idx_labels, load_idx_images, load_idx_labels, RawImages, IMAGE_MAGIC,
    IMAGE_SIDE, LABEL_MAGIC, MNIST_CLASSES,
};
pub use synthetic::{synthetic_sync_dataset, SYNTHETIC_MARGIN};

/// Environment variable naming the directory with the four MNIST IDX files.
pub const MNIST_DIR_ENV: &str = "MNIST_DIR";

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Feature rows with one class label each.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn new(features: Array2<f32>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "labels per dataset",
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::LabelOutOfRange {
                index,
                label,
                classes,
            });
        }
        Ok(Dataset {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Rows and labels at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> (Array2<f32>, Vec<usize>) {
        let x = self.features.select(Axis(0), indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }
}

/// Training and test partitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
}

#[inline]
pub fn normalize_pixel(p: u8) -> f32 {
    f32::from(p) / 255.0
}

/// Scales raw bytes to `[0, 1]` and pairs them with their labels.
pub fn normalize(images: &RawImages, labels: &[u8]) -> Result<Dataset> {
    if images.count != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "labels per image file",
            expected: images.count,
            actual: labels.len(),
        });
    }
    let dim = images.rows * images.cols;
    let features = Array2::from_shape_vec(
        (images.count, dim),
        images.pixels.iter().copied().map(normalize_pixel).collect(),
    )
    .expect("pixel count matches header");
    Dataset::new(
        features,
        labels.iter().map(|&l| usize::from(l)).collect(),
        MNIST_CLASSES,
    )
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_mnist_pair(images: &Path, labels: &Path) -> Result<Dataset> {
    let raw = load_idx_images(&read(images)?)?;
    let lab = load_idx_labels(&read(labels)?)?;
    normalize(&raw, &lab)
}

/// Loads the standard four uncompressed MNIST files from `dir`.
pub fn load_mnist(dir: &Path) -> Result<Split> {
    Ok(Split {
        train: load_mnist_pair(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?,
        test: load_mnist_pair(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?,
    })
}

/// `explicit` if given, else `$MNIST_DIR`.
pub fn resolve_mnist_dir(explicit: Option<&Path>) -> Option<PathBuf> {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
}

/// A permutation of `0..n` fixed by `(seed, epoch)`, cut into consecutive
/// slices of `batch_size` (the last one may be short).
pub fn shuffled_batches(n: usize, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be positive");
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, Domain::Shuffle, epoch));
    order.chunks(batch_size).map(<[usize]>::to_vec).collect()
}

pub fn batches(ds: &Dataset, batch_size: usize, seed: u64, epoch: u64) -> Vec<Vec<usize>> {
    shuffled_batches(ds.len(), batch_size, seed, epoch)
}
