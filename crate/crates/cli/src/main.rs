use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use condact::harness::{
    self, compare_configs, csv_path, emit_csv, ComparisonRow, DatasetSource, ExperimentConfig,
    TrainReport, REFERENCE_STRUCTURES, TABLE_HEADER,
};
use condact::network::{grad_check_with, GradCheckOptions};
use condact::{ControlGrad, Error, Network, NetworkSpec};

#[derive(Parser)]
#[command(
    name = "condact",
    version,
    about = "Conditional-activation MLP experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration for every seed and write per-seed CSV curves.
    Train(TrainArgs),
    /// Train two configurations of the same structure and tabulate the difference.
    Compare(CompareArgs),
    /// Check analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Print parameter counts.
    Paramcount(ParamcountArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// JSON experiment config; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Weight layers including the output layer (3 = two hidden layers).
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    neurons: Option<usize>,
    /// Make the second hidden layer half synchrony, half max neurons.
    #[arg(long)]
    hetero: bool,
    /// May be repeated.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Directory holding the MNIST IDX files (defaults to $MNIST_DIR).
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Output directory for CSV curves and reports.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Train on the synthetic coincidence task with this many samples instead of MNIST.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Also save a JSON checkpoint of each trained network.
    #[arg(long)]
    checkpoint: bool,
    /// Worker threads for independent seeds.
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct CompareArgs {
    baseline: PathBuf,
    candidate: PathBuf,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Write the comparison row as JSON here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 16)]
    neurons: usize,
    #[arg(long)]
    hetero: bool,
    #[arg(long, default_value_t = 20)]
    input_dim: usize,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Entries checked per parameter tensor (all when omitted).
    #[arg(long)]
    samples: Option<usize>,
    /// Check the plain piecewise derivative instead of the surrogate gradient.
    #[arg(long)]
    blocked: bool,
}

#[derive(Args)]
struct ParamcountArgs {
    #[arg(long, default_value_t = 3)]
    layers: usize,
    #[arg(long, default_value_t = 100)]
    neurons: usize,
    #[arg(long)]
    hetero: bool,
    /// Print every reference structure, homogeneous and heterogeneous.
    #[arg(long)]
    table: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => train(args),
        Command::Compare(args) => compare(args),
        Command::Gradcheck(args) => gradcheck(args),
        Command::Paramcount(args) => paramcount(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_divergence() => 2,
        Some(Error::Io { .. } | Error::Csv { .. }) => 3,
        _ if err.downcast_ref::<std::io::Error>().is_some() => 3,
        _ => 1,
    }
}

fn train_config(args: &TrainArgs) -> anyhow::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.layers {
        cfg.layers = v;
    }
    if let Some(v) = args.neurons {
        cfg.neurons = v;
    }
    if args.hetero {
        cfg.heterogeneous = true;
    }
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.lr {
        cfg.adam.lr = v;
    }
    if args.data_dir.is_some() {
        cfg.data_dir = args.data_dir.clone();
    }
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if let Some(n) = args.synthetic {
        cfg.dataset = DatasetSource::SyntheticSync {
            train: n,
            test: (n / 4).max(1),
            seed: 0,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run_stem(cfg: &ExperimentConfig) -> String {
    let kind = if cfg.heterogeneous { "hetero" } else { "homo" };
    format!("{}l{}n_{kind}", cfg.layers, cfg.neurons)
}

fn write_outputs(cfg: &ExperimentConfig, reports: &[TrainReport]) -> anyhow::Result<()> {
    let Some(dir) = &cfg.out else {
        return Ok(());
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let stem = run_stem(cfg);
    for r in reports {
        let path = csv_path(dir, &stem, r.seed);
        emit_csv(r, &path)?;
        eprintln!("wrote {}", path.display());
    }
    let summary = dir.join(format!("{stem}_reports.json"));
    std::fs::write(&summary, serde_json::to_string_pretty(reports)?).map_err(|e| Error::Io {
        path: summary.clone(),
        source: e,
    })?;
    Ok(())
}

fn print_report(r: &TrainReport) {
    println!(
        "{} {} seed {}: params {}, final error {:.3}%, convergence epoch {}, {:.1}s",
        r.structure,
        if r.heterogeneous { "hetero" } else { "homo" },
        r.seed,
        r.param_count,
        r.final_error,
        r.convergence_epoch,
        r.wall_seconds
    );
}

fn run_config(
    cfg: &ExperimentConfig,
    threads: usize,
    checkpoint: bool,
) -> anyhow::Result<Vec<TrainReport>> {
    let data = cfg.load_data().context("loading data")?;
    let reports = if threads > 1 {
        harness::run_experiment(cfg, &data, threads)?
    } else {
        let mut out = Vec::new();
        for &seed in &cfg.seeds {
            let mut progress = |e: &harness::EpochRecord| {
                eprintln!(
                    "seed {seed} epoch {:>4}: loss {:.5} train {:.3}% test {:.3}%",
                    e.epoch, e.train_loss, e.train_error, e.test_error
                )
            };
            out.push(harness::train_run(cfg, seed, &data, &mut progress)?);
        }
        out
    };
    if checkpoint {
        save_checkpoints(cfg, &data, &reports)?;
    }
    Ok(reports)
}

fn save_checkpoints(
    cfg: &ExperimentConfig,
    data: &condact::Split,
    reports: &[TrainReport],
) -> anyhow::Result<()> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    for r in reports {
        // Retrain deterministically; the harness does not hand out networks.
        let mut net = harness::build_network(cfg, data.train.dim(), data.train.classes, r.seed)?;
        harness::train_network(
            &mut net,
            cfg.adam,
            data,
            cfg.epochs,
            cfg.batch_size,
            r.seed,
            &mut |_| {},
        )?;
        let path = dir.join(format!("{}_seed{}.json", run_stem(cfg), r.seed));
        condact::network::Checkpoint::from_network(&net, Some(r.seed)).save(&path)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let mut cfg = train_config(&args)?;
    if cfg.out.is_none() {
        cfg.out = Some(PathBuf::from("results"));
    }
    let reports = run_config(&cfg, args.threads, args.checkpoint)?;
    for r in &reports {
        print_report(r);
    }
    write_outputs(&cfg, &reports)
}

fn compare(args: CompareArgs) -> anyhow::Result<()> {
    let load =
        |p: &Path| ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display()));
    let baseline = load(&args.baseline)?;
    let candidate = load(&args.candidate)?;
    if baseline.layers != candidate.layers || baseline.neurons != candidate.neurons {
        bail!(
            "structures differ: {} vs {}",
            baseline.structure_label(),
            candidate.structure_label()
        );
    }
    let base_reports = run_config(&baseline, args.threads, false)?;
    write_outputs(&baseline, &base_reports)?;
    let cand_reports = run_config(&candidate, args.threads, false)?;
    write_outputs(&candidate, &cand_reports)?;
    let row: ComparisonRow = compare_configs(&baseline, &candidate, &base_reports, &cand_reports)?;
    println!("{TABLE_HEADER}");
    println!("{row}");
    if let Some(path) = args.json {
        std::fs::write(&path, serde_json::to_string_pretty(&row)?).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> anyhow::Result<()> {
    let cfg = ExperimentConfig {
        layers: args.layers,
        neurons: args.neurons,
        heterogeneous: args.hetero,
        ..Default::default()
    };
    let spec: NetworkSpec = cfg
        .network_spec(args.input_dim, args.classes)?
        .wire_controls(args.seed)?;
    let net = Network::<f64>::init(&spec, args.seed)?;
    let x: Vec<f64> = (0..args.input_dim)
        .map(|i| ((i as f64 * 0.7 + args.seed as f64).sin() + 1.0) / 2.0)
        .collect();
    let label = args.seed as usize % args.classes;
    let opts = GradCheckOptions {
        epsilon: args.epsilon,
        mode: if args.blocked {
            ControlGrad::Blocked
        } else {
            ControlGrad::Surrogate
        },
        max_per_tensor: args.samples,
        seed: args.seed,
    };
    let report = grad_check_with(&net, &x, label, &opts)?;
    println!(
        "checked {} parameters, skipped {} ({:.2}%), max relative error {:.3e}",
        report.checked,
        report.skipped,
        100.0 * report.skipped_fraction(),
        report.max_rel_error
    );
    if let Some(w) = report.worst {
        println!("worst: layer {} {:?} index {}", w.layer, w.tensor, w.index);
    }
    if report.max_rel_error >= 1e-5 {
        bail!("gradient check failed");
    }
    Ok(())
}

fn paramcount(args: ParamcountArgs) -> anyhow::Result<()> {
    let count = |layers, neurons, heterogeneous| {
        ExperimentConfig {
            layers,
            neurons,
            heterogeneous,
            ..Default::default()
        }
        .mnist_param_count()
    };
    if args.table {
        println!("structure,homogeneous,heterogeneous");
        for (layers, neurons) in REFERENCE_STRUCTURES {
            println!(
                "{layers}-layer {neurons} neurons,{},{}",
                count(layers, neurons, false)?,
                count(layers, neurons, true)?
            );
        }
    } else {
        println!("{}", count(args.layers, args.neurons, args.hetero)?);
    }
    Ok(())
}
