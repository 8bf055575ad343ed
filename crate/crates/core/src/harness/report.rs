use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of trailing epochs averaged into the final error.
pub const FINAL_WINDOW: usize = 5;

/// An epoch counts as converged once its error is within 1% of the final error.
pub const CONVERGENCE_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Misclassified training samples during the epoch, in percent.
    pub train_error: f64,
    /// Misclassified test samples after the epoch, in percent.
    pub test_error: f64,
    pub train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub structure: String,
    pub heterogeneous: bool,
    pub param_count: usize,
    /// Test error of the untrained network.
    pub initial_test_error: f64,
    pub epochs: Vec<EpochRecord>,
    pub final_error: f64,
    pub convergence_epoch: usize,
    pub wall_seconds: f64,
}

impl TrainReport {
    pub fn test_errors(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.test_error).collect()
    }

    /// Equality of everything except wall-clock time.
    pub fn same_outcome(&self, other: &TrainReport) -> bool {
        TrainReport {
            wall_seconds: 0.0,
            ..self.clone()
        } == TrainReport {
            wall_seconds: 0.0,
            ..other.clone()
        }
    }
}

/// Mean test error over the last [`FINAL_WINDOW`] epochs.
pub fn final_error(test_errors: &[f64]) -> Result<f64> {
    if test_errors.len() < FINAL_WINDOW {
        return Err(Error::RunTooShort {
            epochs: test_errors.len(),
            required: FINAL_WINDOW,
        });
    }
    let tail = &test_errors[test_errors.len() - FINAL_WINDOW..];
    Ok(tail.iter().sum::<f64>() / FINAL_WINDOW as f64)
}

/// First 1-based epoch whose test error is at most `final / 0.99`.
pub fn convergence_epoch(test_errors: &[f64]) -> Result<usize> {
    let threshold = final_error(test_errors)? / CONVERGENCE_FRACTION;
    let idx = test_errors
        .iter()
        .position(|&e| e <= threshold)
        .expect("the minimum of the final window is below its mean");
    Ok(idx + 1)
}

pub fn csv_path(dir: &Path, stem: &str, seed: u64) -> PathBuf {
    dir.join(format!("{stem}_seed{seed}.csv"))
}

/// Writes `epoch,train_error,test_error`, one row per epoch.
pub fn emit_csv(report: &TrainReport, path: &Path) -> Result<()> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["epoch", "train_error", "test_error"])
        .map_err(csv_err)?;
    for e in &report.epochs {
        w.write_record([
            e.epoch.to_string(),
            format!("{:.10}", e.train_error),
            format!("{:.10}", e.test_error),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads back `(epoch, train_error, test_error)` rows.
pub fn read_csv(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}
