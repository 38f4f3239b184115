use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "kernelcal", version, about = "Kernel calibration errors and calibration tests")]
pub struct Cli {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "KERNELCAL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the squared kernel calibration error.
    Estimate(EstimateArgs),
    /// Test the hypothesis that the model is calibrated.
    Test(TestArgs),
    /// Estimate the squared unnormalized calibration mean embedding.
    Ucme(UcmeArgs),
    /// Classical diagnostics: quantile curve, pinball loss, NLL, MSE, ECE.
    Diagnose(DiagnoseArgs),
    /// Apply temperature scaling and write the recalibrated dataset.
    Recalibrate(RecalibrateArgs),
    /// Run estimator or test sweeps on a synthetic scenario and write CSV.
    SyntheticBenchmark(BenchmarkArgs),
    /// Write a synthetic scenario dataset.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Metric {
    /// W2 for normal and Laplace, mixture W2 for mixtures, parameter
    /// embedding for discrete families.
    Auto,
    W2,
    MixtureW2,
    ParamEuclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetKernelKind {
    /// Delta for categorical predictions, gaussian otherwise.
    Auto,
    Gaussian,
    Laplacian,
    Delta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Expectation {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Args)]
pub struct KernelArgs {
    /// Distance between predictions.
    #[arg(long, value_enum, default_value_t = Metric::Auto)]
    pub metric: Metric,
    /// Order `s` of the mixture Wasserstein distance.
    #[arg(long, default_value_t = 2.0)]
    pub mw_order: f64,
    /// Prediction kernel `exp(-lambda d^nu)`: lambda.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Prediction kernel `exp(-lambda d^nu)`: nu.
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    /// Kernel on targets.
    #[arg(long, value_enum, default_value_t = TargetKernelKind::Auto)]
    pub target_kernel: TargetKernelKind,
    /// Target kernel rate (default 0.5 for gaussian, 1 for laplacian).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// How expectations under predictions are computed.
    #[arg(long, value_enum, default_value_t = Expectation::Analytic)]
    pub expectation: Expectation,
    /// Samples per Monte-Carlo expectation.
    #[arg(long, default_value_t = 10_000)]
    pub mc_samples: usize,
    /// Seed of the Monte-Carlo expectations.
    #[arg(long, default_value_t = 0)]
    pub mc_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Estimator {
    PlugIn,
    Block,
    UStat,
    All,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Dataset file.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Estimator::UStat)]
    pub estimator: Estimator,
    /// Block size B of the block estimator.
    #[arg(long, default_value_t = 2)]
    pub block_size: usize,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Asymptotic fixed-block test with the empirical block std.
    Block,
    /// Asymptotic fixed-block test with the h-squared variance estimate.
    BlockHSquared,
    /// Asymptotic test with blocks of size floor(sqrt(n)).
    SqrtBlock,
    /// Bootstrap test of the U-statistic.
    Bootstrap,
    /// Calibration mean embedding test.
    Cme,
}

#[derive(Debug, Clone, Args)]
pub struct LocationArgs {
    /// Test locations file (dataset format); generated when absent.
    #[arg(long)]
    pub locations: Option<PathBuf>,
    /// Number of generated test locations.
    #[arg(long, default_value_t = 10)]
    pub num_locations: usize,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::Bootstrap)]
    pub method: Method,
    #[arg(long, default_value_t = 2)]
    pub block_size: usize,
    /// Bootstrap resamples.
    #[arg(long, default_value_t = 1000)]
    pub bootstrap: usize,
    /// Seed of resampling and generated test locations.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Significance level.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[command(flatten)]
    pub locations: LocationArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct UcmeArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub locations: LocationArgs,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Quantile curve on the grid 0.05, 0.10, ..., 0.95.
    #[arg(long)]
    pub quantile_curve: bool,
    /// Pinball loss at these levels.
    #[arg(long, value_delimiter = ',')]
    pub pinball: Vec<f64>,
    #[arg(long)]
    pub nll: bool,
    #[arg(long)]
    pub mse: bool,
    /// Confidence-binned ECE with this many bins.
    #[arg(long)]
    pub binned_ece: Option<usize>,
    /// Oracle conditionals (dataset format, same order as the data) for
    /// the oracle ECE and MCE.
    #[arg(long)]
    pub oracle: Option<PathBuf>,
    /// Norm exponent of the oracle ECE.
    #[arg(long, default_value_t = 2.0)]
    pub q: f64,
}

#[derive(Debug, Args)]
pub struct RecalibrateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub temperature: f64,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioKind {
    Calibrated,
    Uncalibrated,
    Ols,
    Friedman1,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_enum)]
    pub scenario: ScenarioKind,
    /// Target dimension of the Gaussian scenarios.
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Noise standard deviation of the Friedman 1 scenario.
    #[arg(long, default_value_t = 1.0)]
    pub noise_sd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchmarkKind {
    Estimators,
    Tests,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    #[arg(long, value_enum, default_value_t = BenchmarkKind::Tests)]
    pub kind: BenchmarkKind,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [4usize, 16, 64, 256, 1024])]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 200)]
    pub replicates: usize,
    #[arg(long, default_value_t = 500)]
    pub bootstrap: usize,
    /// Also run the CME test with this many generated locations.
    #[arg(long)]
    pub cme_locations: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Reference SKCE for the estimator sweep; estimated when absent.
    #[arg(long)]
    pub ground_truth: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add wall-clock rows (output is then not reproducible).
    #[arg(long)]
    pub timing: bool,
    /// CSV output path; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub kernel: KernelArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset output path; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}
