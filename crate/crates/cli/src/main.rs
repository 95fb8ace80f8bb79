//! `e2lmvsc`: generate synthetic data, train, evaluate label files, and
//! check gradients.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use e2lmvsc::cluster::ClusterMetrics;
use e2lmvsc::dataio::{read_labels, save_dataset, synth_generate, MatrixFormat, SynthSpec};
use e2lmvsc::pipeline::{metrics_json, model_grad_check, run_experiment, TrainConfig};
use e2lmvsc::{Error, Result};

const EXIT_BAD_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(name = "e2lmvsc", version, about = "Deep multi-view subspace clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multi-view dataset directory.
    Synth(SynthArgs),
    /// Train on a dataset directory and write run artifacts.
    Train(TrainArgs),
    /// Score a predicted label file against ground truth.
    Eval(EvalArgs),
    /// Finite-difference check of the full objective on a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    views: usize,
    #[arg(long)]
    clusters: usize,
    #[arg(long)]
    shared_dim: Option<usize>,
    #[arg(long)]
    private_dim: Option<usize>,
    #[arg(long)]
    noise_dim: Option<usize>,
    #[arg(long)]
    noise_scale: Option<f64>,
    #[arg(long)]
    seed: u64,
    /// csv or f64bin
    #[arg(long, default_value = "csv")]
    format: MatrixFormat,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// JSON file with TrainConfig fields; flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs_pretrain: Option<usize>,
    #[arg(long)]
    epochs_finetune: Option<usize>,
    #[arg(long)]
    pretrain_only: bool,
    #[arg(long)]
    export_affinity: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Smallest label value in the truth file.
    #[arg(long, default_value_t = 0)]
    truth_base: u8,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
}

fn synth(args: SynthArgs) -> Result<()> {
    let defaults = SynthSpec::new(args.n, args.views, args.clusters, args.seed);
    let spec = SynthSpec {
        shared_dim: args.shared_dim.unwrap_or(defaults.shared_dim),
        private_dim: args.private_dim.unwrap_or(defaults.private_dim),
        noise_dim: args.noise_dim.unwrap_or(defaults.noise_dim),
        noise_scale: args.noise_scale.unwrap_or(defaults.noise_scale),
        ..defaults
    };
    let ds = synth_generate(&spec)?;
    save_dataset(&ds, &args.out, args.format)?;
    println!("wrote n={} views={:?} k={} to {}", ds.n, ds.view_dims(), ds.k, args.out.display());
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(path) => TrainConfig::from_json_file(path)?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(e) = args.epochs_pretrain {
        cfg.epochs_pretrain = e;
    }
    if let Some(e) = args.epochs_finetune {
        cfg.epochs_finetune = e;
    }
    cfg.pretrain_only |= args.pretrain_only;
    cfg.export_affinity |= args.export_affinity;
    let report = run_experiment(&args.data, &cfg, &args.out)?;
    println!(
        "pretrain {} epochs ({:.1}s), finetune {} epochs ({:.1}s), theta_s {:.6}",
        report.pretrain_history.len(),
        report.timings.pretrain_secs,
        report.history.len(),
        report.timings.finetune_secs,
        report.theta_s.unwrap_or(f64::NAN),
    );
    if let Some(m) = &report.final_metrics {
        print!("{}", metrics_json(m));
    }
    Ok(())
}

fn read_any_labels(path: &Path, base: u8) -> Result<Vec<usize>> {
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    read_labels(path, base, usize::MAX >> 1)
}

fn eval(args: EvalArgs) -> Result<()> {
    let pred = read_any_labels(&args.pred, 0)?;
    let truth = read_any_labels(&args.truth, args.truth_base)?;
    let m = ClusterMetrics::compute(&pred, &truth)?;
    print!("{}", metrics_json(&m));
    Ok(())
}

fn gradcheck(args: GradcheckArgs) -> Result<bool> {
    let report = model_grad_check(args.seed, args.tol)?;
    for e in &report.entries {
        println!("{:<28} {:.3e}", e.name, e.max_rel_error);
    }
    let worst = report.max_rel_error();
    println!("{} max relative error {worst:.3e} (tol {:.1e})", if report.pass { "PASS" } else { "FAIL" }, args.tol);
    Ok(report.pass)
}

fn configure_threads() -> std::result::Result<(), String> {
    let Ok(raw) = std::env::var("E2LMVSC_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| format!("E2LMVSC_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(msg) = configure_threads() {
        eprintln!("error: {msg}");
        return ExitCode::from(EXIT_BAD_INPUT);
    }
    let outcome = match cli.command {
        Command::Synth(a) => synth(a).map(|_| true),
        Command::Train(a) => train(a).map(|_| true),
        Command::Eval(a) => eval(a).map(|_| true),
        Command::Gradcheck(a) => gradcheck(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_NUMERICAL),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { EXIT_NUMERICAL } else { EXIT_BAD_INPUT })
        }
    }
}
