use std::path::PathBuf;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "nnmatch", version, about = "Nearest-neighbor matching estimators of integral functionals")]
pub struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integral of the regression function over a box.
    Psi(PsiArgs),
    /// Regression function averaged over auxiliary target covariates.
    Phi(PhiArgs),
    /// Average treatment effect on the treated.
    Att(AttArgs),
    /// Average treatment effect restricted to a covariate box.
    AteRegion(AteRegionArgs),
    /// Target-domain risk from source losses under covariate shift.
    CovshiftLoss(PhiArgs),
    /// Fourier-series regression estimate under Berkson errors.
    Berkson(BerksonArgs),
    /// Monte Carlo study of the box-integral estimator.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    /// Long-form markdown table (simulate only).
    Markdown,
    /// Markdown with K across the columns (simulate only).
    Wide,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Degree of the local polynomial.
    #[arg(long = "L", default_value_t = 1)]
    pub degree: u32,
    /// Number of nearest neighbors (default: the theoretical minimum).
    #[arg(long = "K")]
    pub k: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub response_col: String,
}

#[derive(Debug, Args)]
pub struct PsiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Integration box, e.g. "0.2:0.8,0.2:0.8".
    #[arg(long)]
    pub support: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[arg(long, default_value_t = nnmatch::estimators::DEFAULT_MC_POINTS)]
    pub mc_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct PhiArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// CSV of target covariates; a column named like the response is ignored.
    #[arg(long)]
    pub targets: PathBuf,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AttArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Column with 0/1 treatment indicators.
    #[arg(long, default_value = "d")]
    pub treatment_col: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct AteRegionArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "d")]
    pub treatment_col: String,
    #[arg(long)]
    pub support: String,
    #[command(flatten)]
    pub fit: FitArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("cutoff").required(true).args(["jn", "alpha"])))]
pub struct BerksonArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Box for the coefficient integrals (default: [-pi, pi]^d).
    #[arg(long)]
    pub support: Option<String>,
    /// Frequency cutoff.
    #[arg(long = "Jn")]
    pub jn: Option<usize>,
    /// Sobolev smoothness; sets the cutoff from n and, without --L, the degree.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Decay exponent of the error density (default: that of --error-density).
    #[arg(long, requires = "alpha")]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 1.0, requires = "alpha")]
    pub cutoff_scale: f64,
    /// "identity" or "laplace:<scale>".
    #[arg(long, default_value = "identity")]
    pub error_density: String,
    /// Degree of the local polynomial (default: ceil(alpha) - 1, or 1).
    #[arg(long = "L")]
    pub degree: Option<u32>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long, default_value_t = nnmatch::estimators::DEFAULT_MC_POINTS)]
    pub mc_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Smallest admissible |f^ft(j)|.
    #[arg(long, default_value_t = nnmatch::berkson::DEFAULT_SPECTRAL_TOL)]
    pub tol: f64,
    /// Also write h_hat on a grid over [-pi, pi]^d to this CSV file.
    #[arg(long)]
    pub grid_out: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub grid_points: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// f1_box, f1_full or f2_box.
    #[arg(long)]
    pub scenario: String,
    /// Sample sizes.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Replicates per cell.
    #[arg(long = "N", default_value_t = 1000)]
    pub replicates: usize,
    /// Cells as L:K pairs.
    #[arg(long, value_delimiter = ',', default_value = "0:1,1:6")]
    pub fit: Vec<String>,
    #[arg(long, default_value_t = nnmatch::estimators::DEFAULT_MC_POINTS)]
    pub mc_points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Override the scenario's noise standard deviation.
    #[arg(long)]
    pub noise_sd: Option<f64>,
    /// Convergence tolerance of the true-value quadrature.
    #[arg(long, default_value_t = nnmatch::sim::ORACLE_TOL)]
    pub oracle_tol: f64,
    /// Write per-replicate errors to this CSV file.
    #[arg(long)]
    pub errors_out: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
