use std::fmt;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::report::TrainReport;
use crate::error::{Error, Result};

/// Aggregate of all seeds of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub heterogeneous: bool,
    pub param_count: usize,
    pub seeds: usize,
    pub mean_final_error: f64,
    pub mean_convergence_epoch: f64,
}

impl RunSummary {
    pub fn from_reports(reports: &[TrainReport]) -> Result<Self> {
        let first = reports
            .first()
            .ok_or_else(|| Error::InvalidArgument("no reports to summarize".into()))?;
        let n = reports.len() as f64;
        Ok(RunSummary {
            heterogeneous: first.heterogeneous,
            param_count: first.param_count,
            seeds: reports.len(),
            mean_final_error: reports.iter().map(|r| r.final_error).sum::<f64>() / n,
            mean_convergence_epoch: reports
                .iter()
                .map(|r| r.convergence_epoch as f64)
                .sum::<f64>()
                / n,
        })
    }
}

/// One row of the homogeneous-vs-heterogeneous comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub structure: String,
    pub baseline: RunSummary,
    pub candidate: RunSummary,
}

impl ComparisonRow {
    /// Relative reduction of the mean final error, in percent.
    pub fn error_improvement(&self) -> f64 {
        relative_drop(
            self.baseline.mean_final_error,
            self.candidate.mean_final_error,
        )
    }

    /// Relative reduction of the mean convergence epoch, in percent.
    pub fn speedup(&self) -> f64 {
        relative_drop(
            self.baseline.mean_convergence_epoch,
            self.candidate.mean_convergence_epoch,
        )
    }

    pub fn extra_params(&self) -> i64 {
        self.candidate.param_count as i64 - self.baseline.param_count as i64
    }
}

fn relative_drop(base: f64, new: f64) -> f64 {
    if base == new {
        0.0
    } else {
        100.0 * (base - new) / base
    }
}

/// Pairs two configurations of the same depth and width with their reports.
pub fn compare_configs(
    baseline: &ExperimentConfig,
    candidate: &ExperimentConfig,
    baseline_reports: &[TrainReport],
    candidate_reports: &[TrainReport],
) -> Result<ComparisonRow> {
    if baseline.layers != candidate.layers || baseline.neurons != candidate.neurons {
        return Err(Error::InvalidArgument(format!(
            "cannot compare {} with {}",
            baseline.structure_label(),
            candidate.structure_label()
        )));
    }
    if baseline.dataset != candidate.dataset {
        return Err(Error::InvalidArgument(
            "configurations train on different datasets".into(),
        ));
    }
    Ok(ComparisonRow {
        structure: baseline.structure_label(),
        baseline: RunSummary::from_reports(baseline_reports)?,
        candidate: RunSummary::from_reports(candidate_reports)?,
    })
}

pub const TABLE_HEADER: &str =
    "structure             | type   | params  | error %  | conv. epoch | error gain % | speedup %";

impl fmt::Display for ComparisonRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = |s: &RunSummary| if s.heterogeneous { "hetero" } else { "homo" };
        writeln!(
            f,
            "{:<21} | {:<6} | {:>7} | {:>8.3} | {:>11.1} |",
            self.structure,
            kind(&self.baseline),
            self.baseline.param_count,
            self.baseline.mean_final_error,
            self.baseline.mean_convergence_epoch,
        )?;
        write!(
            f,
            "{:<21} | {:<6} | {:>7} | {:>8.3} | {:>11.1} | {:>12.1} | {:>9.1}",
            "",
            kind(&self.candidate),
            self.candidate.param_count,
            self.candidate.mean_final_error,
            self.candidate.mean_convergence_epoch,
            self.error_improvement(),
            self.speedup(),
        )
    }
}
