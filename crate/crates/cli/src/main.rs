//! `cdvm`: generate data, estimate attribution matrices, prune with CDVM and run
//! retention benchmarks.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ConfigError;

#[derive(Debug, Parser)]
#[command(name = "cdvm", version, about = "Constraint data-value maximization for data pruning")]
struct Cli {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true, env = "CDVM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic clustered dataset as CSV.
    Gen(GenArgs),
    /// Estimate the attribution matrix with maximum sample reuse.
    Attribute(AttributeArgs),
    /// Solve CDVM for one or more budgets.
    Prune(PruneArgs),
    /// Run the retention-level benchmark over the method roster.
    Bench(BenchArgs),
    /// Overlap and selection-frequency analysis of saved retained sets.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Named preset instead of a CSV (`fig1`).
    #[arg(long)]
    pub preset: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct LearnerArgs {
    /// nearest-neighbor, nearest-centroid or multinomial-logistic.
    #[arg(long)]
    pub learner: Option<String>,
}

#[derive(Debug, Args, Default)]
pub struct MsrArgs {
    /// Inclusion probability of each training point per model.
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub num_models: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub preset: Option<String>,
    /// Cluster centers as `x,y;x,y;...`.
    #[arg(long)]
    pub centers: Option<String>,
    /// Training points per cluster, comma separated.
    #[arg(long)]
    pub sizes: Option<String>,
    /// Class label per cluster.
    #[arg(long)]
    pub labels: Option<String>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Validation and test points per cluster.
    #[arg(long)]
    pub test_sizes: Option<String>,
    /// Output CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AttributeArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    pub msr: MsrArgs,
    /// Output matrix file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    /// Attribution matrix file.
    #[arg(long = "t", alias = "attribution")]
    pub attribution: Option<PathBuf>,
    /// Dataset, used for the coverage summary and for grid search.
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub learner: LearnerArgs,
    /// Absolute budgets, comma separated.
    #[arg(long)]
    pub budgets: Option<String>,
    /// Retention fractions, comma separated.
    #[arg(long)]
    pub levels: Option<String>,
    /// One value, or a comma-separated grid.
    #[arg(long)]
    pub alpha: Option<String>,
    /// `default`, a number, or a comma-separated grid of both.
    #[arg(long)]
    pub kappa: Option<String>,
    /// Output directory for solution JSON files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Precomputed attribution matrix shared by all seeds; estimated per seed otherwise.
    #[arg(long = "t", alias = "attribution")]
    pub attribution: Option<PathBuf>,
    #[command(flatten)]
    pub learner: LearnerArgs,
    #[command(flatten)]
    pub msr: MsrArgs,
    #[arg(long)]
    pub levels: Option<String>,
    /// Number of seeds.
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Subset of random, loo, shapley, banzhaf, dataoob, cdvm.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub alpha: Option<String>,
    #[arg(long)]
    pub kappa: Option<String>,
    #[arg(long)]
    pub dataoob_bootstraps: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// `retained.json` written by `bench`.
    #[arg(long, conflicts_with = "solutions")]
    pub retained: Option<PathBuf>,
    /// Solution JSON files written by `prune`, one per level.
    #[arg(long, num_args = 1..)]
    pub solutions: Vec<PathBuf>,
    /// Number of training points (defaults to the largest index + 1).
    #[arg(long)]
    pub n: Option<usize>,
    /// same-seed or cross-level.
    #[arg(long, default_value = "same-seed")]
    pub pairing: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<cdvm::Error>() {
            return match e {
                cdvm::Error::Solver(_) => 4,
                cdvm::Error::Io(_) | cdvm::Error::Parse(_) | cdvm::Error::Json(_) => 3,
                _ => 2,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_millis()
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let result = (|| {
        let mut pool = rayon::ThreadPoolBuilder::new();
        if let Some(t) = cli.threads {
            if t == 0 {
                return Err(config::config_error("--threads must be at least 1"));
            }
            pool = pool.num_threads(t);
        }
        let pool = pool.build()?;
        let config = config::RunConfig::load_or_default(cli.config.as_deref())?;
        let seed = config::pick(cli.seed, &config.seed).unwrap_or(0);
        pool.install(|| match &cli.command {
            Command::Gen(a) => commands::gen(a, &config, seed),
            Command::Attribute(a) => commands::attribute(a, &config, seed),
            Command::Prune(a) => commands::prune(a, &config, seed),
            Command::Bench(a) => commands::bench(a, &config, seed),
            Command::Analyze(a) => commands::analyze(a, &config),
        })
    })();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
