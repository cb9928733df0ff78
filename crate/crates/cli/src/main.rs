//! `hsbqr` command-line driver.
//!
//! Exit codes: 0 success, 1 run failure, 2 usage error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hsbqr::gaussian::Backend;
use hsbqr::gar::GrowthMode;
use hsbqr::mc::{ErrorModel, Sparsity};
use hsbqr::sampler::{Prior, SamplerConfig};

#[derive(Parser)]
#[command(name = "hsbqr", version, about = "Horseshoe Bayesian quantile regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo study: coefficient bias and forecast error tables.
    Mc(McArgs),
    /// Fit a data set at one or more quantile levels.
    Fit(FitArgs),
    /// Rolling-origin quantile forecasts, densities and evaluation.
    Forecast(ForecastArgs),
    /// Evaluate a forecast file (optionally against a benchmark).
    Eval(EvalArgs),
}

fn parse_with<T: std::str::FromStr<Err = hsbqr::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: hsbqr::Error| e.to_string())
}

fn parse_growth(s: &str) -> Result<GrowthMode, String> {
    match s {
        "log" => Ok(GrowthMode::AnnualizedLog),
        "simple" => Ok(GrowthMode::AnnualizedSimple),
        "compound" => Ok(GrowthMode::AnnualizedCompound),
        _ => Err(format!("unknown growth mode '{s}' (log|simple|compound)")),
    }
}

/// Chain settings shared by every command.
#[derive(Args, Serialize, Clone)]
struct ChainArgs {
    /// Coefficient sampler: fast, cholesky, or auto (fast when K > T).
    #[arg(long, default_value = "auto", value_parser = parse_with::<Backend>)]
    backend: Backend,
    /// Total Gibbs sweeps per chain.
    #[arg(long, default_value_t = 5000)]
    iters: usize,
    /// Sweeps discarded as burn-in.
    #[arg(long, default_value_t = 1000)]
    burn: usize,
    /// Keep every n-th retained sweep.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    thin: u64,
    /// Exempt the intercept from shrinkage.
    #[arg(long)]
    no_shrink_intercept: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Worker threads (falls back to HSBQR_THREADS, then all cores).
    #[arg(long, env = "HSBQR_THREADS")]
    #[serde(skip)]
    threads: Option<usize>,
    /// Store wall-clock timings in the manifest (makes it run-dependent).
    #[arg(long)]
    #[serde(skip)]
    record_timings: bool,
}

impl ChainArgs {
    fn sampler(&self, prior: Prior) -> SamplerConfig {
        SamplerConfig {
            prior,
            n_iter: self.iters,
            n_burn: self.burn,
            thin: self.thin as usize,
            beta_backend: self.backend,
            shrink_intercept: !self.no_shrink_intercept,
            ..SamplerConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
struct McArgs {
    #[arg(long, default_value = "sparse", value_parser = parse_with::<Sparsity>)]
    design: Sparsity,
    /// Error model: y1, y2, y3, y4 or none.
    #[arg(long, default_value = "y1", value_parser = parse_with::<ErrorModel>)]
    error: ErrorModel,
    /// Training observations per replication.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    train: u64,
    /// Holdout observations shared by all replications.
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    holdout: u64,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u64).range(1..))]
    reps: u64,
    /// Coefficient pattern width (200 gives K = 406 for the sparse design).
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    width: u64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,0.9")]
    quantiles: Vec<f64>,
    /// One or more priors, each scored as its own estimator.
    #[arg(long, value_delimiter = ',', default_value = "horseshoe", value_parser = parse_with::<Prior>)]
    prior: Vec<Prior>,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// CSV with a header row; every column except the target is a regressor.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    target: String,
    #[arg(long, value_delimiter = ',', default_value = "0.5")]
    quantiles: Vec<f64>,
    #[arg(long, default_value = "horseshoe", value_parser = parse_with::<Prior>)]
    prior: Prior,
    /// Do not prepend a column of ones.
    #[arg(long)]
    no_intercept: bool,
    /// Fit on the raw columns instead of standardized ones.
    #[arg(long)]
    no_standardize: bool,
    /// Credible-interval level.
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct ForecastArgs {
    /// Panel CSV (dates in the first column).
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Target column of the panel.
    #[arg(long, required_unless_present = "synthetic")]
    target: Option<String>,
    /// Turn target levels into growth: log, simple or compound.
    #[arg(long, value_parser = parse_growth)]
    growth: Option<GrowthMode>,
    /// Drop rows before this date (YYYY-MM-DD, M/D/YYYY or YYYYQn).
    #[arg(long)]
    start: Option<String>,
    /// Ignore the panel's transform row.
    #[arg(long)]
    no_transform_codes: bool,
    /// Simulate a panel with this many periods instead of reading one.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Forecast horizons.
    #[arg(long = "h", value_delimiter = ',', default_value = "1")]
    horizons: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    window: usize,
    /// Number of equidistant quantile levels.
    #[arg(long, default_value_t = 19)]
    grid: usize,
    /// Grow the estimation window instead of rolling it.
    #[arg(long)]
    expanding: bool,
    #[arg(long, default_value = "horseshoe", value_parser = parse_with::<Prior>)]
    prior: Prior,
    /// Points per exported density grid.
    #[arg(long, default_value_t = 200)]
    density_points: usize,
    #[command(flatten)]
    chain: ChainArgs,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct EvalArgs {
    /// Forecast CSV as written by `forecast`.
    #[arg(long)]
    forecasts: PathBuf,
    /// Benchmark forecast CSV for the Diebold-Mariano comparison.
    #[arg(long)]
    benchmark: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    density_points: usize,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let result = match cli.command {
        Command::Mc(a) => commands::mc(a),
        Command::Fit(a) => commands::fit(a),
        Command::Forecast(a) => commands::forecast(a),
        Command::Eval(a) => commands::eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(commands::CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::CliError::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
