use std::time::Instant;

use ndarray::Axis;

use super::config::{build_network, ExperimentConfig};
use super::report::{convergence_epoch, final_error, EpochRecord, TrainReport};
use crate::data::{batches, Dataset, Split};
use crate::error::{Error, Result};
use crate::network::{argmax_rows, param_count, softmax_cross_entropy_batch, ControlGrad, Network};
use crate::optim::{Adam, AdamConfig};

const EVAL_CHUNK: usize = 1000;

/// Percentage of `ds` misclassified by `net` (argmax, ties to the lowest class).
pub fn error_rate(net: &Network<f32>, ds: &Dataset) -> Result<f64> {
    if ds.is_empty() {
        return Ok(0.0);
    }
    let mut wrong = 0usize;
    for (chunk, labels) in ds
        .features
        .axis_chunks_iter(Axis(0), EVAL_CHUNK)
        .zip(ds.labels.chunks(EVAL_CHUNK))
    {
        let logits = net.logits(chunk)?;
        wrong += argmax_rows(logits.view())
            .iter()
            .zip(labels)
            .filter(|(p, l)| p != l)
            .count();
    }
    Ok(100.0 * wrong as f64 / ds.len() as f64)
}

/// Mini-batch Adam training of an existing network for `epochs` epochs.
/// `on_epoch` sees every record as it is produced.
pub fn train_network(
    net: &mut Network<f32>,
    adam: AdamConfig,
    data: &Split,
    epochs: usize,
    batch_size: usize,
    seed: u64,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Vec<EpochRecord>> {
    if batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut opt = Adam::for_network(adam, net);
    let mut records = Vec::with_capacity(epochs);
    for epoch in 1..=epochs {
        let mut wrong = 0usize;
        let mut loss_sum = 0.0f64;
        for (b, idx) in batches(&data.train, batch_size, seed, epoch as u64)
            .iter()
            .enumerate()
        {
            let diverged = |reason: String| Error::Divergence {
                epoch,
                batch: b,
                reason,
            };
            let (x, labels) = data.train.gather(idx);
            let (logits, trace) = net.forward(x.view()).map_err(|e| diverged(e.to_string()))?;
            let (loss, dlogits) = softmax_cross_entropy_batch(logits.view(), &labels)?;
            if !loss.is_finite() {
                return Err(diverged(format!("loss is {loss}")));
            }
            loss_sum += f64::from(loss) * labels.len() as f64;
            wrong += argmax_rows(logits.view())
                .iter()
                .zip(&labels)
                .filter(|(p, l)| p != l)
                .count();
            let grads = net.backward(&trace, dlogits.view(), ControlGrad::Surrogate)?;
            opt.update_network(net, &grads)
                .map_err(|e| diverged(e.to_string()))?;
        }
        let n = data.train.len().max(1) as f64;
        let record = EpochRecord {
            epoch,
            train_error: 100.0 * wrong as f64 / n,
            test_error: error_rate(net, &data.test)?,
            train_loss: loss_sum / n,
        };
        on_epoch(&record);
        records.push(record);
    }
    Ok(records)
}

/// One full training run of `cfg` with `seed`.
pub fn train_run(
    cfg: &ExperimentConfig,
    seed: u64,
    data: &Split,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<TrainReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut net = build_network(cfg, data.train.dim(), data.train.classes, seed)?;
    let initial_test_error = error_rate(&net, &data.test)?;
    let epochs = train_network(
        &mut net,
        cfg.adam,
        data,
        cfg.epochs,
        cfg.batch_size,
        seed,
        on_epoch,
    )?;
    let test_errors: Vec<f64> = epochs.iter().map(|e| e.test_error).collect();
    let (final_error, convergence_epoch) = if test_errors.len() >= super::report::FINAL_WINDOW {
        (final_error(&test_errors)?, convergence_epoch(&test_errors)?)
    } else {
        // Too short for the windowed metrics; report the last epoch.
        (
            test_errors.last().copied().unwrap_or(initial_test_error),
            test_errors.len(),
        )
    };
    Ok(TrainReport {
        seed,
        structure: cfg.structure_label(),
        heterogeneous: cfg.heterogeneous,
        param_count: param_count(&net.spec()),
        initial_test_error,
        epochs,
        final_error,
        convergence_epoch,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// One report per seed. Runs are independent and each is single-threaded,
/// so they are spread over up to `threads` worker threads without
/// affecting the results.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &Split,
    threads: usize,
) -> Result<Vec<TrainReport>> {
    cfg.validate()?;
    let threads = threads.clamp(1, cfg.seeds.len());
    if threads == 1 {
        return cfg
            .seeds
            .iter()
            .map(|&s| train_run(cfg, s, data, &mut |_| {}))
            .collect();
    }
    let chunks: Vec<&[u64]> = cfg
        .seeds
        .chunks(cfg.seeds.len().div_ceil(threads))
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = chunks
            .iter()
            .map(|seeds| {
                scope.spawn(move || {
                    seeds
                        .iter()
                        .map(|&s| train_run(cfg, s, data, &mut |_| {}))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        let mut out = Vec::with_capacity(cfg.seeds.len());
        for h in handles {
            out.extend(h.join().expect("training thread panicked")?);
        }
        Ok(out)
    })
}
