//! `qrs`: quantile regression on large datasets via informative subsampling.
//!
//! Data flows to stdout (or `--out`), logs flow to stderr. Exit codes:
//! 0 success, 2 usage or configuration error, 3 data error (missing or
//! malformed inputs), 4 numeric failure.

mod config;

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::Rng;

use qrs_core::bench::{self, EmitFormat, ExperimentConfig};
use qrs_core::datagen::{self, SyntheticSpec};
use qrs_core::estimator::{self, FitDocument};
use qrs_core::sampling::SamplingMethod;
use qrs_core::{Dataset, Error, ResponseColumn, Streams};

pub(crate) const EXIT_USAGE: i32 = 2;
const EXIT_DATA: i32 = 3;
const EXIT_NUMERIC: i32 = 4;

#[derive(Parser)]
#[command(
    name = "qrs",
    version,
    about = "Quantile regression for large datasets via informative subsampling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (default: all cores, or the QRS_THREADS variable).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Suppress logs on stderr.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit coefficients on a CSV dataset and print a JSON report.
    Fit(FitArgs),
    /// Export sampling probabilities as CSV (row_index, pi).
    Plan(PlanArgs),
    /// Generate a synthetic dataset and write it as CSV.
    Simulate(SimulateArgs),
    /// Run a simulation grid from a config file.
    Bench(BenchArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,
    /// Response column: a header name or a 0-based index.
    #[arg(long)]
    response: String,
    /// Treat the first line as a header.
    #[arg(long)]
    has_header: bool,
    /// Prepend an intercept column of ones.
    #[arg(long)]
    add_intercept: bool,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Quantile level in (0,1).
    #[arg(long)]
    tau: f64,
    /// Sampling method: uniform, lopt, aopt, universal.
    #[arg(long, default_value = "lopt")]
    method: String,
    /// Pilot subsample size.
    #[arg(long, default_value_t = 1_000)]
    n0: usize,
    /// Per-batch subsample size.
    #[arg(long, default_value_t = 1_000)]
    n: usize,
    /// Number of repeated batches.
    #[arg(long = "B", default_value_t = 10)]
    b: usize,
    /// RNG seed; drawn from system entropy (and reported) when omitted.
    #[arg(long)]
    seed: Option<u64>,
    /// Confidence level for the reported intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlanArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Quantile level; required for lopt and aopt plans.
    #[arg(long)]
    tau: Option<f64>,
    /// Sampling method: uniform, lopt, aopt, universal.
    #[arg(long, default_value = "lopt")]
    method: String,
    /// Pilot subsample size for residual-based plans.
    #[arg(long, default_value_t = 1_000)]
    n0: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the plan CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config file (key=value lines, '#' comments).
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path for the generated dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    /// Config file (key=value lines, '#' comments).
    #[arg(long)]
    config: PathBuf,
    /// Output path for the result file.
    #[arg(long)]
    out: PathBuf,
    /// Output format: csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

pub(crate) struct Failure {
    pub(crate) code: i32,
    pub(crate) message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io { .. } | Error::Parse { .. } | Error::Shape(_) => EXIT_DATA,
            Error::InvalidSpec(_) => EXIT_USAGE,
            Error::NotPositiveDefinite
            | Error::RankDeficient
            | Error::DegenerateWeights(_)
            | Error::SingularDn
            | Error::DegeneratePilot(_)
            | Error::InvalidPlan(_)
            | Error::SingularCombination
            | Error::MissingVariance
            | Error::PartialBatchFailure { .. } => EXIT_NUMERIC,
        };
        Self { code, message: e.to_string() }
    }
}

fn main() {
    let cli = Cli::parse();

    let level = if cli.quiet { "off" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    if let Err(f) = configure_threads(cli.threads).and_then(|()| run(cli.command)) {
        eprintln!("error: {}", f.message);
        std::process::exit(f.code);
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), Failure> {
    let from_env = std::env::var("QRS_THREADS")
        .ok()
        .map(|v| {
            v.parse::<usize>()
                .map_err(|_| Failure::usage(format!("QRS_THREADS must be an integer, got {v:?}")))
        })
        .transpose()?;
    if let Some(n) = threads.or(from_env) {
        if n == 0 {
            return Err(Failure::usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Fit(args) => cmd_fit(args),
        Command::Plan(args) => cmd_plan(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn load_input(args: &InputArgs) -> Result<Dataset, Failure> {
    let response = match args.response.parse::<usize>() {
        Ok(idx) => ResponseColumn::Index(idx),
        Err(_) => ResponseColumn::Name(args.response.clone()),
    };
    Ok(Dataset::load_csv(
        &args.input,
        args.has_header,
        &response,
        args.add_intercept,
    )?)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let drawn = rand::rng().random();
        log::info!("no seed given; drew {drawn} from system entropy");
        drawn
    })
}

fn parse_method(s: &str) -> Result<SamplingMethod, Failure> {
    SamplingMethod::from_str(s).map_err(|e| Failure::usage(e.to_string()))
}

fn write_or_print(out: Option<&PathBuf>, body: &str) -> Result<(), Failure> {
    match out {
        Some(path) => std::fs::write(path, body)
            .map_err(|e| Error::Io { path: path.display().to_string(), source: e }.into()),
        None => {
            println!("{body}");
            Ok(())
        }
    }
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    if !(args.tau > 0.0 && args.tau < 1.0) {
        return Err(Failure::usage(format!(
            "--tau must lie strictly inside (0,1), got {}",
            args.tau
        )));
    }
    let method = parse_method(&args.method)?;
    let data = load_input(&args.input)?;
    let seed = resolve_seed(args.seed);
    let streams = Streams::new(seed);
    let est =
        estimator::iterative_with_method(&data, args.n0, args.n, args.b, args.tau, method, &streams)?;
    let doc = FitDocument::from_estimate(&est, method, args.n0, seed, args.level)?;
    let body = serde_json::to_string_pretty(&doc)
        .map_err(|e| Failure { code: EXIT_NUMERIC, message: e.to_string() })?;
    write_or_print(args.out.as_ref(), &body)
}

fn cmd_plan(args: PlanArgs) -> Result<(), Failure> {
    let method = parse_method(&args.method)?;
    let tau = match (method, args.tau) {
        (SamplingMethod::Uniform | SamplingMethod::Universal, t) => t.unwrap_or(0.5),
        (_, Some(t)) if t > 0.0 && t < 1.0 => t,
        (_, Some(t)) => {
            return Err(Failure::usage(format!(
                "--tau must lie strictly inside (0,1), got {t}"
            )))
        }
        (m, None) => {
            return Err(Failure::usage(format!("--tau is required for method {m}")));
        }
    };
    let data = load_input(&args.input)?;
    let seed = resolve_seed(args.seed);
    let streams = Streams::new(seed);
    let planned = estimator::prepare_plan(&data, args.n0, tau, method, &streams)?;

    let mut body = String::from("row_index,pi\n");
    for (i, p) in planned.plan.pi().iter().enumerate() {
        body.push_str(&format!("{i},{p}\n"));
    }
    write_or_print(args.out.as_ref(), &body)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let spec: SyntheticSpec = config::parse_simulate_config(&read_config(&args.config)?)?;
    let (data, _) = datagen::generate(&spec)?;
    data.save_csv(&args.out)?;
    log::info!(
        "wrote {} rows x {} columns to {}",
        data.n_rows(),
        data.n_cols(),
        args.out.display()
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let format = EmitFormat::from_str(&args.format).map_err(|e| Failure::usage(e.to_string()))?;
    let config: ExperimentConfig = config::parse_bench_config(&read_config(&args.config)?)?;
    let result = bench::run_experiment(&config)?;
    bench::emit(&result, format, &args.out)?;
    log::info!("wrote results to {}", args.out.display());

    // Summary table on stdout.
    println!(
        "{:<14} {:>6} {:>6} {:>5} {:>5} {:>12} {:>12} {:>10}",
        "method", "tau", "n", "B", "S", "mse", "emse", "runtime_ms"
    );
    for cell in &result.cells {
        match &cell.stats {
            Some(stats) => println!(
                "{:<14} {:>6} {:>6} {:>5} {:>5} {:>12.5e} {:>12} {:>10.1}",
                cell.key.method.to_string(),
                cell.key.tau,
                cell.key.n,
                cell.key.b,
                result.config.replicates,
                stats.empirical_mse,
                stats
                    .mean_estimated_mse
                    .map(|e| format!("{e:.5e}"))
                    .unwrap_or_else(|| "-".into()),
                stats.mean_runtime_ms,
            ),
            None => println!(
                "{:<14} {:>6} {:>6} {:>5} {:>5} failed: {}",
                cell.key.method.to_string(),
                cell.key.tau,
                cell.key.n,
                cell.key.b,
                result.config.replicates,
                cell.error.as_deref().unwrap_or("unknown"),
            ),
        }
    }
    Ok(())
}

fn read_config(path: &PathBuf) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e }.into())
}
