//! Experiment runner: network construction from a config, training,
//! error/convergence metrics and CSV curves.

mod compare;
mod config;
mod report;
mod train;

pub use compare::{compare_configs, ComparisonRow, RunSummary, TABLE_HEADER};
pub use config::{
    build_network, DatasetSource, ExperimentConfig, CONDITIONAL_HIDDEN_LAYER, DEFAULT_BATCH_SIZE,
    DEFAULT_EPOCHS, REFERENCE_STRUCTURES, SMOKE_EPOCHS,
};
pub use report::{
    convergence_epoch, csv_path, emit_csv, final_error, read_csv, EpochRecord, TrainReport,
    CONVERGENCE_FRACTION, FINAL_WINDOW,
};
pub use train::{error_rate, run_experiment, train_network, train_run};
