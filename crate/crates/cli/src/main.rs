//! `burger`: ingest data, train, evaluate, denoise and run the self-checks.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(
    name = "burger",
    version,
    about = "Social recommendation with posterior-guided graph denoising"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Load interaction and social TSV files, split them and write a dataset.
    Ingest(IngestArgs),
    /// Generate a planted-community dataset with labeled noise edges.
    Synth(SynthArgs),
    /// Train, optionally over a grid of settings.
    Train(TrainArgs),
    /// Score a trained snapshot on a dataset.
    Eval(EvalArgs),
    /// Build one enhanced social slice from a trained run.
    Denoise(DenoiseArgs),
    /// Retrain under increasing social noise and report the metric drops.
    Robustness(RobustnessArgs),
    /// Gradient, posterior and order-statistic self-checks.
    Check(CheckArgs),
}

#[derive(Args, Debug)]
struct OutArgs {
    /// Output directory; created if absent.
    #[arg(short, long)]
    out: PathBuf,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct SplitArgs {
    /// Train share of each user's interactions.
    #[arg(long, default_value_t = 0.7)]
    ratio: f64,
    /// Candidate negatives per evaluated user, or `all`.
    #[arg(long, default_value = "99")]
    negatives: String,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// `user<TAB>item[<TAB>rating]` per line.
    #[arg(long)]
    interactions: PathBuf,
    /// `user<TAB>user` per line.
    #[arg(long)]
    social: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    users: usize,
    #[arg(long, default_value_t = 200)]
    items: usize,
    #[arg(long, default_value_t = 2)]
    communities: usize,
    #[arg(long, default_value_t = 0.1)]
    interaction_intra: f64,
    #[arg(long, default_value_t = 0.005)]
    interaction_inter: f64,
    #[arg(long, default_value_t = 0.1)]
    social_intra: f64,
    #[arg(long, default_value_t = 0.0)]
    social_inter: f64,
    /// Injected noise edges as a fraction of the clean edges.
    #[arg(long, default_value_t = 0.3)]
    noise_ratio: f64,
    #[arg(long, default_value_t = 1)]
    subgroups: usize,
    #[arg(long, default_value_t = 1.0)]
    subgroup_boost: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    split: SplitArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Clone)]
struct ConfigArgs {
    /// Start from a dataset preset: ciao, douban or yelp.
    #[arg(long)]
    preset: Option<String>,
    /// `key=value` config file applied after the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Single override, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Training seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset directory written by `ingest` or `synth`.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Grid axis, `key=v1,v2,...`; repeatable. Runs every combination.
    #[arg(long = "grid", value_name = "KEY=V1,V2")]
    grid: Vec<String>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Output directory of `train`.
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Also write metrics.json and per-user ranks here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args, Debug)]
struct DenoiseArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Prior override: `constant[:p]` or `degree[:eps]`.
    #[arg(long)]
    prior: Option<String>,
    /// Return the symmetric closure of the enhanced slice.
    #[arg(long)]
    symmetrize: bool,
    /// Edge list of known noise pairs, to report their survival.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct RobustnessArgs {
    #[arg(long)]
    data: PathBuf,
    /// Noise ratios, comma-separated, each in [0, 1).
    #[arg(long, default_value = "0,0.1,0.2,0.3", value_delimiter = ',')]
    ratios: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CheckArgs {
    /// Samples per order-statistic check.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    /// Random instances in the gradient suite.
    #[arg(long, default_value_t = 12)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Histogram bins in the written CSVs.
    #[arg(long, default_value_t = 40)]
    bins: usize,
    /// Also write the reports and histograms here.
    #[arg(short, long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

/// A failed command. Validation failures exit 1, runtime faults 2.
#[derive(Debug)]
pub enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    pub fn validation(op: &str, msg: impl std::fmt::Display) -> Self {
        Failure::Validation(format!("{op}: {msg}"))
    }

    pub fn runtime(op: &str, msg: impl std::fmt::Display) -> Self {
        Failure::Runtime(format!("{op}: {msg}"))
    }
}

impl From<burger_core::Error> for Failure {
    fn from(e: burger_core::Error) -> Self {
        if e.is_validation() {
            Failure::Validation(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Synth(a) => commands::synth(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Denoise(a) => commands::denoise(a),
        Command::Robustness(a) => commands::robustness(a),
        Command::Check(a) => commands::check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
