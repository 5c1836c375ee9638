use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use tdmv::Layer;

mod commands;
mod output;

/// Mean-variance optimal trading strategies over a finite horizon.
#[derive(Parser, Debug)]
#[command(name = "tdmv", version, about)]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Master RNG seed
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,

    /// Output file (stdout when absent)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProcessKindArg {
    WhiteNoise,
    Ar1,
}

#[derive(Args, Debug, Clone)]
pub struct ProcessArgs {
    #[arg(long, value_enum, default_value_t = ProcessKindArg::Ar1)]
    pub process: ProcessKindArg,

    /// AR(1) coefficient
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub a: f64,

    /// Fluctuation variance
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,

    /// Whether the process describes price fluctuations or increments
    #[arg(long, default_value = "price")]
    pub layer: Layer,

    /// Drift slope b in mu_t = b t
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub drift: f64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum What {
    Matrix,
    Inverse,
    Strategy,
}

#[derive(Args, Debug, Clone)]
pub struct DriftArgs {
    /// Drift slope b, giving mu_t = b t
    #[arg(long, allow_negative_numbers = true, conflicts_with = "drift_file")]
    pub drift: Option<f64>,

    /// Expected prices as a headed CSV whose last column is mu_t
    #[arg(long)]
    pub drift_file: Option<PathBuf>,

    /// Reference price
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub x0: f64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate a sample path of fluctuations
    Synth {
        #[command(flatten)]
        process: ProcessArgs,
        /// Number of values
        #[arg(long)]
        n: usize,
        /// Cumulate increments into prices x_t = x0 + b t + sum of increments
        #[arg(long)]
        cumulate: bool,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Exact price-level matrices, closed-form inverses and strategies
    Truecov {
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long, value_enum, default_value_t = What::Matrix)]
        what: What,
        /// Target returns (strategy only); the global minimum when absent
        #[arg(long = "target", allow_negative_numbers = true)]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
    },
    /// Sample auto-covariance matrix from a series file or a simulated path
    Estimate {
        /// Headed CSV whose last column holds the series
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        process: ProcessArgs,
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long = "M")]
        sample_size: usize,
        /// Remove the linear trend (prices) or the mean (increments) first
        #[arg(long)]
        detrend: bool,
        /// Map increment matrices to the price level
        #[arg(long)]
        price_level: bool,
    },
    /// Optimal strategies for a price-level matrix
    Optimize {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        drift: DriftArgs,
        /// Target returns; the global minimum when absent
        #[arg(long = "target", allow_negative_numbers = true)]
        targets: Vec<f64>,
    },
    /// Minimal risk against target return
    Frontier {
        #[arg(long)]
        matrix: PathBuf,
        #[command(flatten)]
        drift: DriftArgs,
        /// Explicit targets; otherwise a grid from --from to --to
        #[arg(long = "target", allow_negative_numbers = true)]
        targets: Vec<f64>,
        #[arg(long, allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long, default_value_t = 40)]
        points: usize,
    },
    /// Log-eigenvalue histogram of one or more matrices
    Spectrum {
        #[arg(long = "matrix", required = true)]
        matrices: Vec<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Spectrum for independent unit-variance increments
    Nullspec {
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long = "M")]
        sample_size: usize,
        #[arg(long, default_value_t = 200)]
        replicas: usize,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Shrink a sampled increment matrix towards its diagonal
    Clean {
        #[arg(long)]
        matrix: PathBuf,
        /// Intensity in [0, 1], or `auto`
        #[arg(long)]
        delta: String,
        /// Further increment matrices used by `--delta auto`
        #[arg(long = "pool")]
        pool: Vec<PathBuf>,
        /// Map the cleaned matrix to the price level
        #[arg(long)]
        price_level: bool,
    },
    /// Monte Carlo sweep over aspect ratios
    Mc {
        /// JSON experiment configuration
        #[arg(long)]
        config: PathBuf,
        /// Record wall-clock time in the report
        #[arg(long)]
        timed: bool,
    },
    /// Rolling-window analysis of a price file
    Pipeline {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "Date")]
        date_column: String,
        #[arg(long, default_value = "Adj Close")]
        price_column: String,
        #[arg(long = "T", default_value_t = 50)]
        horizon: usize,
        #[arg(long = "M", default_value_t = 100)]
        sample_size: usize,
        /// Window offset; T + M (disjoint) when absent
        #[arg(long)]
        stride: Option<usize>,
        /// `none`, `auto`, or an intensity in [0, 1]
        #[arg(long, default_value = "none")]
        clean: String,
        /// Use prices rather than log prices
        #[arg(long)]
        raw_prices: bool,
        /// Explicit targets
        #[arg(long = "target", allow_negative_numbers = true)]
        targets: Vec<f64>,
        /// Use the preset targets
        #[arg(long, conflicts_with = "targets")]
        presets: bool,
        /// Grid size when no targets are given
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long, default_value_t = 200)]
        null_replicas: usize,
        #[arg(long)]
        bins: Option<usize>,
    },
}

fn init_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("TDMV_THREADS") {
        let n: usize =
            v.trim().parse().map_err(|_| anyhow::anyhow!("TDMV_THREADS must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|_| commands::run(&cli.common, cli.command));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let kind = err.downcast_ref::<tdmv::Error>().map_or("runtime", |e| e.kind());
            eprintln!("{}", json!({ "error": kind, "message": format!("{err:#}") }));
            ExitCode::from(1)
        }
    }
}
