use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod files;

/// Exit code 1: the invocation itself was wrong.
/// Exit code 2: the inputs or the pipeline failed.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<fuzzy_pomdp::Error> for CliError {
    fn from(e: fuzzy_pomdp::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "fuzzy-pomdp", version, about = "POMDP learning with fuzzy expert priors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample trajectories from a ground-truth environment.
    GenData(GenDataArgs),
    /// Roll out trajectories from a fuzzy model.
    GenFuzzyData(GenFuzzyDataArgs),
    /// Fit a model with standard or Fuzzy-MAP EM.
    Train(TrainArgs),
    /// Score a learned model against a ground-truth environment.
    Eval(EvalArgs),
    /// Run one experiment regime over a range of seeds.
    Reproduce(ReproduceArgs),
    /// Run a regime over a grid of prior weights.
    Sweep(SweepArgs),
    /// Check JSON files produced or consumed by this tool.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct GenDataArgs {
    /// Environment JSON file.
    env: PathBuf,
    /// Number of trajectories.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Observation noise; a variance unless --noise-is-std is given.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    noise_is_std: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `uniform`, `constant:<action>` or `cycle:<a>,<b>,...`.
    #[arg(long, default_value = "uniform")]
    policy: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct GenFuzzyDataArgs {
    /// Fuzzy model JSON file.
    fuzzy_model: PathBuf,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 9, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: u64,
    /// Standard deviation of the noise added to each rollout step.
    #[arg(long, default_value_t = 0.05)]
    output_noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "uniform")]
    policy: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Em,
    FuzzyMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum InitKind {
    Random,
    Kmeans,
    File,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Dataset JSON file.
    dataset: PathBuf,
    #[arg(long, value_enum, default_value_t = Algo::Em)]
    algo: Algo,
    #[arg(long)]
    fuzzy_model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    lambda_t: f64,
    #[arg(long, default_value_t = 0.05)]
    lambda_o: f64,
    #[arg(long, value_enum, default_value_t = InitKind::Random)]
    init: InitKind,
    /// Starting model for --init file.
    #[arg(long)]
    init_file: Option<PathBuf>,
    /// Latent states; defaults to the dataset's environment, else 2.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    states: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..))]
    matchant_samples: u64,
    /// Plain EM iterations run after Fuzzy-MAP converges.
    #[arg(long, default_value_t = 0)]
    final_em_iterations: u64,
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    max_iterations: u64,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Checkpoint output path.
    #[arg(long)]
    out: PathBuf,
    /// Training report path; defaults to `<out>` with a `.report.json` suffix.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint, training report or model file.
    model: PathBuf,
    #[arg(long)]
    env: PathBuf,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum RegimeArg {
    LowData,
    HighNoise,
    Mg,
}

#[derive(Args, Debug)]
struct RegimeOpts {
    /// Required unless the config file names one.
    #[arg(long, value_enum)]
    regime: Option<RegimeArg>,
    /// Run seeds 0..N (default 20, or the config file's list).
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    seeds: Option<u64>,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    restarts: Option<u64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    matchant_samples: Option<u64>,
    #[arg(long)]
    env: Option<PathBuf>,
    #[arg(long)]
    fuzzy_model: Option<PathBuf>,
    /// Observation noise; a variance unless --noise-is-std is given.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    noise_is_std: bool,
}

#[derive(Args, Debug)]
struct ReproduceArgs {
    #[command(flatten)]
    regime: RegimeOpts,
    #[arg(long)]
    lambda_t: Option<f64>,
    #[arg(long)]
    lambda_o: Option<f64>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    regime: RegimeOpts,
    /// Values for lambda_t.
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1,0.5,1")]
    grid: Vec<f64>,
    /// Values for lambda_o; defaults to --grid.
    #[arg(long, value_delimiter = ',')]
    grid_o: Option<Vec<f64>>,
    /// Use lambda_o = lambda_t instead of the full product grid.
    #[arg(long)]
    tied: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Skip detection and check every file as this kind.
    #[arg(long, value_enum)]
    kind: Option<files::Kind>,
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("FUZZY_POMDP_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::GenFuzzyData(a) => commands::gen_fuzzy_data(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Reproduce(a) => commands::reproduce(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
    }
}
