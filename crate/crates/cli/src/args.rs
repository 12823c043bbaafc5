use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "riskpg", version, about = "Risk-aware policy gradient toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Risk of a sample file or a discrete distribution file.
    Estimate(EstimateArgs),
    /// Exact, finite-difference and sampled gradients at one θ.
    GradCheck(GradCheckArgs),
    /// MSE of a risk or gradient estimator against its exact value.
    MseBench(MseBenchArgs),
    /// Runs RAPG and writes the run record.
    Train(TrainArgs),
    /// Stationarity report over seeds and iteration counts.
    Report(ReportArgs),
    /// Built-in environments.
    #[command(subcommand)]
    Env(EnvCommand),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Tabular,
    /// Feature softmax using the feature map in the MDP file.
    Feature,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorKind {
    /// Plug-in risk of the sampled discounted returns.
    Risk,
    /// Batch policy-gradient estimate.
    Gradient,
}

/// An MDP from a file or from the catalog.
#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelSource {
    /// MDP spec file (TOML).
    #[arg(long)]
    pub mdp: Option<PathBuf>,
    /// Catalog environment name.
    #[arg(long)]
    pub env: Option<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[command(flatten)]
    pub source: ModelSource,
    #[arg(long, value_enum, default_value = "tabular")]
    pub policy: PolicyKind,
    /// Treat the file's numbers as rewards and negate them on ingestion.
    #[arg(long)]
    pub reward_mode: bool,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct DataSource {
    /// One real per line, '#' starts a comment.
    #[arg(long)]
    pub samples: Option<PathBuf>,
    /// One "value probability" pair per line, '#' starts a comment.
    #[arg(long)]
    pub dist: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataSource,
    #[arg(long)]
    pub risk: String,
    #[arg(long, default_value_t = riskpg::risk::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long)]
    pub reward_mode: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub risk: String,
    /// θ coordinates are drawn uniformly from [-1, 1] with this seed; θ = 0
    /// when absent.
    #[arg(long)]
    pub theta_seed: Option<u64>,
    /// Seed for the sampled estimates.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub m: usize,
    #[arg(long, default_value_t = 200)]
    pub replications: usize,
    #[arg(long, default_value_t = riskpg::oracle::FD_STEP)]
    pub fd_step: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct MseBenchArgs {
    #[arg(long, value_enum)]
    pub estimator: EstimatorKind,
    #[arg(long)]
    pub risk: String,
    #[arg(long, conflicts_with_all = ["env", "policy"])]
    pub dist: Option<PathBuf>,
    #[arg(long, conflicts_with = "env")]
    pub mdp: Option<PathBuf>,
    #[arg(long)]
    pub env: Option<String>,
    #[arg(long, value_enum, default_value = "tabular")]
    pub policy: PolicyKind,
    #[arg(long)]
    pub reward_mode: bool,
    #[arg(long)]
    pub theta_seed: Option<u64>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = riskpg::oracle::DEFAULT_M_LIST)]
    pub m_list: Vec<usize>,
    #[arg(long, default_value_t = riskpg::oracle::DEFAULT_REPLICATIONS)]
    pub replications: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = riskpg::risk::DEFAULT_TOL)]
    pub tol: f64,
    /// Fresh directory for mse.csv and summary.json.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    /// Constant step size (default 1/√N).
    #[arg(long)]
    pub eta: Option<f64>,
    /// Step size scale·i^(−exponent); needs --eta-exponent.
    #[arg(long, requires = "eta_exponent", conflicts_with = "eta")]
    pub eta_scale: Option<f64>,
    #[arg(long, requires = "eta_scale")]
    pub eta_exponent: Option<f64>,
    /// Constant batch size (default ⌈√N⌉).
    #[arg(long)]
    pub batch: Option<usize>,
    /// Coordinate box "lo,hi" applied after every update.
    #[arg(long, allow_hyphen_values = true, value_parser = parse_box)]
    pub project: Option<(f64, f64)>,
    #[arg(long, default_value_t = riskpg::risk::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub risk: String,
    /// Number of iterations N.
    #[arg(long)]
    pub iterations: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub schedule: ScheduleArgs,
    /// Fresh directory for run_record.json and trace.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub risk: String,
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    /// Comma-separated iteration counts.
    #[arg(long, value_delimiter = ',', default_values_t = [100, 400, 1600])]
    pub n_grid: Vec<usize>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = riskpg::risk::DEFAULT_TOL)]
    pub tol: f64,
    /// Fresh directory for report.json and stationarity.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum EnvCommand {
    /// Catalog entries with their verified preferences.
    List,
    /// Writes a catalog entry as an MDP spec file.
    Export {
        name: String,
        /// Destination; must not exist.
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_box(text: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = text.split_once(',').ok_or("expected 'lo,hi'")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("hi: {e}"))?;
    Ok((lo, hi))
}
