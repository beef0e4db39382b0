mod commands;
mod manifest;
mod spec;

use std::path::PathBuf;
use std::process::ExitCode;

use calibra::{Error, ErrorClass};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

/// Calibration-error estimation, recalibration and simulation.
#[derive(Debug, Parser)]
#[command(name = "calibra", version)]
struct Cli {
    /// Worker threads for sweeps and pairwise estimators. Results do not
    /// depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the run manifest here instead of to stderr.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
enum Command {
    /// Evaluate one estimator on a prediction file.
    Estimate(EstimateArgs),
    /// Fit a map on validation data and report estimators before and after on test data.
    Recalibrate(RecalibrateArgs),
    /// Estimator means over repeated subsamples at log-spaced sizes.
    Sweep(SweepArgs),
    /// Monte-Carlo ECE against its closed-form bias approximation.
    SimulateBias(SimulateBiasArgs),
    /// A joint with zero ECE/TCE/CWCE/KS/MMCE but large CE.
    Counterexample(CounterexampleArgs),
    /// Train the mean-variance network on Friedman-1 and recalibrate its variance.
    RegressDemo(RegressDemoArgs),
    /// Entropy, sharpness and calibration terms of a joint's expected score.
    Decompose(DecomposeArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// `probs` or `logits`.
    #[arg(long, default_value = "probs")]
    pub format: String,
    /// ece, tce_p, cwce_p, ks, kde_tce, mmce, skce or rbs.
    #[arg(long)]
    pub estimator: String,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long)]
    pub equal_mass: bool,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub debias: bool,
    /// A positive number or `auto`.
    #[arg(long)]
    pub bandwidth: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct RecalibrateArgs {
    #[arg(long)]
    pub val: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "probs")]
    pub format: String,
    /// identity, ts, ets, tf, tf_accuracy or tf_binary.
    #[arg(long, default_value = "ts")]
    pub method: String,
    /// Estimator spec such as `ece bins=100`; repeatable. Defaults to the standard roster.
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    /// Prediction file to subsample without replacement.
    #[arg(long, conflicts_with = "joint")]
    pub input: Option<PathBuf>,
    /// Joint JSON to sample from instead; needs --max-size.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long, default_value = "probs")]
    pub format: String,
    #[arg(long, default_value_t = 100)]
    pub min_size: usize,
    #[arg(long)]
    pub max_size: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub ticks: usize,
    /// Comma-separated counts, one per tick or a single one for all.
    #[arg(long)]
    pub replicates: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "estimator")]
    pub estimators: Vec<String>,
    /// Also evaluate after tempering with this temperature; repeatable.
    #[arg(long = "temperature")]
    pub temperatures: Vec<f64>,
    /// Validation file: switches to an improvement sweep, fitting --method on it.
    #[arg(long, requires = "input")]
    pub val: Option<PathBuf>,
    #[arg(long, default_value = "ts")]
    pub method: String,
    /// `csv` or `json`.
    #[arg(long, default_value = "json")]
    pub output_format: String,
    /// Also write long-format plot data here.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateBiasArgs {
    #[arg(long, default_value_t = 100)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub scale: f64,
    /// Inverse-Wishart degrees of freedom; defaults to the class count.
    #[arg(long)]
    pub df: Option<f64>,
    /// Predictions drawn once to form the oracle joint.
    #[arg(long, default_value_t = 20_000)]
    pub pool: usize,
    /// Temper the oracle predictions; 1 keeps it calibrated.
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Size range `lo..hi`, log-spaced over --ticks points.
    #[arg(long, default_value = "100..10000")]
    pub n_grid: String,
    #[arg(long, default_value_t = 5)]
    pub ticks: usize,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 15)]
    pub bins: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args, Serialize)]
pub struct CounterexampleArgs {
    #[arg(long, default_value_t = 100)]
    pub classes: usize,
    #[arg(long, default_value_t = 0.01)]
    pub eps: f64,
    /// Number of distinct predictions.
    #[arg(long, default_value_t = 10)]
    pub support: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the joint here instead of embedding it in the output.
    #[arg(long)]
    pub joint_out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RegressDemoArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Rows in each of the train, validation and test splits.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 5000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 50)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 100)]
    pub eval_every: usize,
    /// Read the heteroscedastic noise term as a standard deviation.
    #[arg(long)]
    pub noise_as_std: bool,
    /// Write the training curve as JSON lines here.
    #[arg(long)]
    pub curve: Option<PathBuf>,
    /// `json` or `text` (diagnostics tables).
    #[arg(long, default_value = "json")]
    pub output_format: String,
}

#[derive(Debug, Args, Serialize)]
pub struct DecomposeArgs {
    /// Joint JSON; without it a random joint is drawn from --seed.
    #[arg(long)]
    pub joint: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    #[arg(long, default_value_t = 5)]
    pub support: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `brier`, `log` or `both`.
    #[arg(long, default_value = "both")]
    pub score: String,
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::Config => 2,
        ErrorClass::Data => 3,
        ErrorClass::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CALIBRA_LOG", "error")).init();
    if let Some(k) = cli.threads {
        if k == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli.command, cli.manifest.as_deref()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
