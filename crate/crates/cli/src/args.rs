use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "maxent", version, about = "Regularized maximum-entropy density estimation")]
pub struct Cli {
    /// Worker threads for the parallel kernels (defaults to all cores).
    #[arg(long, global = true, env = "MAXENT_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve at a single hyperparameter.
    Fit(FitArgs),
    /// Fit the warm-started regularization path.
    Path(PathArgs),
    /// Time full paths for several solvers and penalties.
    Bench(BenchArgs),
    /// Run the oracle-equivalence checks.
    Validate(ValidateArgs),
    /// Write a seeded synthetic problem file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PenaltyFlag {
    ElasticNet,
    GroupLasso,
    Linf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverFlag {
    Npdhg,
    NpdhgNonsmooth,
    NpdhgSmooth,
    Fbs,
    Structmaxent2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StopFlag {
    Residual,
    Kkt,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Cell table (CSV: cell_id, ecoregion, fire, [prior], features...).
    #[arg(long, conflicts_with = "problem")]
    pub input: Option<PathBuf>,

    /// Problem file written by `synth` or the library.
    #[arg(long)]
    pub problem: Option<PathBuf>,

    /// Use CSV features as given instead of min-max scaling them.
    #[arg(long)]
    pub raw_features: bool,
}

#[derive(Debug, Args)]
pub struct PenaltyArgs {
    /// Penalty family. Required for CSV input; overrides the problem file's.
    #[arg(long, value_enum)]
    pub penalty: Option<PenaltyFlag>,

    /// Elastic-net mixing parameter in (0, 1].
    #[arg(long)]
    pub alpha: Option<f64>,

    /// JSON file with the feature groups, e.g. [[0,1],[2],[3,4]].
    #[arg(long)]
    pub groups: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    #[arg(long, value_enum, default_value = "npdhg")]
    pub solver: SolverFlag,

    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    #[arg(long, default_value_t = 40)]
    pub min_iters: usize,

    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,

    #[arg(long, value_enum, default_value = "residual")]
    pub stop_rule: StopFlag,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,

    /// Hyperparameter value.
    #[arg(long, conflicts_with_all = ["t_fraction", "t_max_only"])]
    pub t: Option<f64>,

    /// Hyperparameter as a fraction of t_max.
    #[arg(long, conflicts_with = "t_max_only")]
    pub t_fraction: Option<f64>,

    /// Print t_max and exit without solving.
    #[arg(long)]
    pub t_max_only: bool,

    /// Write the solution JSON here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,

    /// Write the fitted distribution as CSV (id,p).
    #[arg(long)]
    pub output_p: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Start of the grid instead of t_max.
    #[arg(long)]
    pub t0: Option<f64>,

    /// Number of grid points; the default anchors are stretched to fit.
    #[arg(long, conflicts_with = "schedule_anchors")]
    pub schedule_count: Option<usize>,

    /// Grid anchors as index:fraction pairs, e.g. 0:1,50:0.5,140:0.05.
    #[arg(long, value_delimiter = ',')]
    pub schedule_anchors: Option<Vec<String>>,

    /// Start every solve from zero.
    #[arg(long)]
    pub cold_start: bool,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub penalty: PenaltyArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    pub schedule: ScheduleArgs,

    /// Path JSON output (stdout when neither output is given).
    #[arg(long)]
    pub output_json: Option<PathBuf>,

    /// One CSV row per grid point: t, iterations, residual, nonzero_count.
    #[arg(long)]
    pub output_csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Problem files to benchmark (repeatable).
    #[arg(long = "problem")]
    pub problems: Vec<PathBuf>,

    /// Cell tables to benchmark (repeatable).
    #[arg(long = "input")]
    pub inputs: Vec<PathBuf>,

    #[arg(long)]
    pub raw_features: bool,

    /// Without inputs, benchmark one synthetic instance of this size.
    #[arg(long, default_value_t = 2000)]
    pub synth_n: usize,

    #[arg(long, default_value_t = 35)]
    pub synth_m: usize,

    #[arg(long, default_value_t = 50.0)]
    pub synth_ratio: f64,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Solvers to compare.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "npdhg,fbs,structmaxent2")]
    pub solvers: Vec<SolverFlag>,

    /// Penalties as elastic-net:ALPHA, group-lasso or linf.
    #[arg(long, value_delimiter = ',', default_value = "elastic-net:0.95")]
    pub penalties: Vec<String>,

    /// Groups for group-lasso entries.
    #[arg(long)]
    pub groups: Option<PathBuf>,

    #[arg(long, default_value_t = 5)]
    pub runs: usize,

    /// Benchmark instances concurrently.
    #[arg(long)]
    pub parallel: bool,

    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,

    #[arg(long, default_value_t = 40)]
    pub min_iters: usize,

    #[arg(long, default_value_t = 200_000)]
    pub max_iters: usize,

    #[arg(long)]
    pub output_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub n: usize,

    #[arg(long)]
    pub m: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    /// Target for |A|_2 / |A|_op.
    #[arg(long, default_value_t = 1.0)]
    pub ratio: f64,

    #[command(flatten)]
    pub penalty: PenaltyArgs,

    #[arg(long)]
    pub output: PathBuf,
}
