//! Experiment runner behind the `kgd` binary.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgd_core::bounds::Suite;
use kgd_core::{Alternative, KernelFamily, KgdConfig64};

pub mod compare;
pub mod double_descent;
pub mod fit;
pub mod output;
pub mod source;
pub mod verify;

pub use source::DataSource;

/// Bad flags or flag combinations; the binary exits with status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// At least one verification check failed; the binary exits with status 1.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationFailed(pub usize);

impl std::fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} check(s) violated", self.0)
    }
}

impl std::error::Error for VerificationFailed {}

#[derive(Debug, Parser)]
#[command(name = "kgd", version, about = "Kernel gradient descent with a decreasing bandwidth")]
pub struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Kernel families, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub kernel: Vec<KernelFamily>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one estimator and write its predictions.
    Fit(FitArgs),
    /// Decreasing-bandwidth descent against GCV and marginal-likelihood ridge regression.
    Compare(CompareArgs),
    /// Train and test error as the minimum bandwidth is swept.
    DoubleDescent(DoubleDescentArgs),
    /// Randomized checks of the generalization bounds.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    KgdDec,
    KgdConst,
    Krr,
    Kgf,
}

#[derive(Debug, Clone, Args)]
pub struct DescentFlags {
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long = "v-r2", default_value_t = 0.05)]
    pub v_r2: f64,
    /// Initial bandwidth; the largest pairwise distance when omitted.
    #[arg(long)]
    pub sigma0: Option<f64>,
    #[arg(long = "sigma-min")]
    pub sigma_min: Option<f64>,
    #[arg(long = "r2-max", default_value_t = 0.99)]
    pub r2_max: f64,
    #[arg(long = "t-max", default_value_t = 1e4)]
    pub t_max: f64,
}

impl DescentFlags {
    pub fn config(&self) -> KgdConfig64 {
        KgdConfig64 {
            dt: self.dt,
            v_r2: self.v_r2,
            sigma0: self.sigma0,
            sigma_min: self.sigma_min,
            r2_max: self.r2_max,
            t_max: self.t_max,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long, default_value = "gen:linear-sine")]
    pub data: DataSource,
    #[arg(long, value_enum, default_value = "kgd-dec")]
    pub method: Method,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Training time for kgf and kgd-const.
    #[arg(long)]
    pub t: Option<f64>,
    #[command(flatten)]
    pub descent: DescentFlags,
    /// Trajectory CSV for iterative methods; defaults to `<out>` with a
    /// `.trajectory.csv` suffix when `--out` is given.
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long, default_value = "gen:linear-sine")]
    pub data: DataSource,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value = "greater")]
    pub alternative: Alternative,
    #[command(flatten)]
    pub descent: DescentFlags,
    /// Per-realization test R² as a second CSV.
    #[arg(long)]
    pub raw: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DoubleDescentArgs {
    #[arg(long, default_value = "gen:dd-sine")]
    pub data: DataSource,
    /// Ridge penalty; the descent runs to `t = 1/λ`.
    #[arg(long, default_value_t = 0.001)]
    pub lambda: f64,
    #[arg(long = "n-sigma", default_value_t = 100)]
    pub n_sigma: usize,
    /// Smallest σ_m; defaults to a fraction of the largest pairwise distance.
    #[arg(long = "sigma-lo")]
    pub sigma_lo: Option<f64>,
    /// Largest σ_m; defaults to the largest pairwise distance.
    #[arg(long = "sigma-hi")]
    pub sigma_hi: Option<f64>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 0.01)]
    pub dt: f64,
    #[arg(long = "v-r2", default_value_t = 0.05)]
    pub v_r2: f64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run, comma separated; all when omitted.
    #[arg(long, value_delimiter = ',')]
    pub suite: Vec<Suite>,
    /// Trials per suite; each suite has its own default.
    #[arg(long)]
    pub trials: Option<usize>,
}

impl Cli {
    pub fn kernels(&self, default: &[KernelFamily]) -> Vec<KernelFamily> {
        if self.kernel.is_empty() {
            default.to_vec()
        } else {
            self.kernel.clone()
        }
    }
}

/// Runs the parsed command on a pool of `--jobs` threads.
pub fn run(cli: &Cli) -> anyhow::Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(UsageError("--jobs must be at least 1".into()).into());
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build()?;
    pool.install(|| match &cli.command {
        Command::Fit(a) => fit::cmd_fit(cli, a),
        Command::Compare(a) => compare::cmd_compare(cli, a),
        Command::DoubleDescent(a) => double_descent::cmd_double_descent(cli, a),
        Command::Verify(a) => verify::cmd_verify(cli, a),
    })
}
