//! Synthetic scenarios and benchmark sweeps.
//!
//! Every generator is a deterministic function of its parameters and seed.
//! Replicate `r` of a sweep at sample size `n` draws from the substream
//! `(seed, DATASET, n, r)`, so replicates are independent and reproducible
//! regardless of how they are scheduled.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Prediction, Target};
use crate::error::{Error, Result};
use crate::estimators::{skce_block, skce_plug_in, skce_u_stat, Dataset, TestLocations};
use crate::hypothesis::{
    sqrt_block_size, test_asymptotic_block, test_asymptotic_sqrt_block, test_bootstrap_u_stat, test_cme,
    BlockVariance, TestReport,
};
use crate::kernels::KernelSpec;
use crate::rng::{role, substream, Stream};
use crate::special::mean_and_variance;

/// Variance of the Gaussian predictions in the calibrated and uncalibrated
/// scenarios.
pub const GAUSSIAN_SCENARIO_VAR: f64 = 0.01;

/// Mean of the first target coordinate in the uncalibrated scenario.
pub const UNCALIBRATED_MEAN: f64 = 0.1;

pub const OLS_TRAINING_SIZE: usize = 100;
pub const OLS_VALIDATION_SIZE: usize = 50;
pub const OLS_NOISE_STD: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Scenario {
    CalibratedGaussian { d: usize },
    UncalibratedGaussian { d: usize },
    OlsRegression,
    /// Validation predictions of the linear Gaussian demo model fitted to
    /// Friedman 1 data.
    Friedman1 { noise_sd: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::CalibratedGaussian { .. } => "calibrated",
            Scenario::UncalibratedGaussian { .. } => "uncalibrated",
            Scenario::OlsRegression => "ols",
            Scenario::Friedman1 { .. } => "friedman1",
        }
    }

    /// Target dimension.
    pub fn dim(&self) -> usize {
        match self {
            Scenario::CalibratedGaussian { d } | Scenario::UncalibratedGaussian { d } => *d,
            _ => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Scenario::CalibratedGaussian { d } | Scenario::UncalibratedGaussian { d } if *d == 0 => {
                Err(Error::Parameter("scenario dimension must be at least 1".into()))
            }
            Scenario::Friedman1 { noise_sd } if !(*noise_sd >= 0.0 && noise_sd.is_finite()) => Err(
                Error::Parameter(format!("noise standard deviation must be finite and >= 0, got {noise_sd}")),
            ),
            _ => Ok(()),
        }
    }

    /// Dataset of `n` pairs drawn from `rng`.
    pub fn generate_with(&self, n: usize, rng: &mut Stream) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(Error::Parameter("datasets need n >= 1".into()));
        }
        match *self {
            Scenario::CalibratedGaussian { d } => gaussian_scenario(d, n, rng, false),
            Scenario::UncalibratedGaussian { d } => gaussian_scenario(d, n, rng, true),
            Scenario::OlsRegression => {
                let train = ols_pairs(OLS_TRAINING_SIZE, rng);
                let fit = OlsFit::fit(&train)?;
                fit.dataset(&ols_pairs(n, rng))
            }
            Scenario::Friedman1 { noise_sd } => {
                let train = friedman1_with(OLS_TRAINING_SIZE, noise_sd, rng);
                let model = LinearGaussianModel::fit(&train)?;
                model.dataset(&friedman1_with(n, noise_sd, rng))
            }
        }
    }
}

/// A scenario together with its size and seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(flatten)]
    pub scenario: Scenario,
    pub n: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn generate(&self) -> Result<Dataset> {
        self.scenario.generate_with(self.n, &mut substream(self.seed, &[role::DATASET]))
    }
}

fn gaussian_scenario(d: usize, n: usize, rng: &mut Stream, shift_first: bool) -> Result<Dataset> {
    let var = GAUSSIAN_SCENARIO_VAR;
    let sd = var.sqrt();
    let mut pairs = Vec::with_capacity(n);
    for _ in 0..n {
        let c: f64 = rng.random_range(0.0..1.0);
        let mut mean = vec![c; d];
        let p = Prediction::diag_normal(mean.clone(), vec![var; d])?;
        if shift_first {
            mean[0] = UNCALIBRATED_MEAN;
        }
        let y = mean
            .iter()
            .map(|m| m + sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        pairs.push((p, Target::Reals(y)));
    }
    Dataset::new(pairs)
}

/// Calibrated model: `P = N(c 1_d, 0.1^2 I)` with `c ~ U(0, 1)` and `Y ~ P`.
pub fn gen_calibrated(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    ScenarioSpec {
        scenario: Scenario::CalibratedGaussian { d },
        n,
        seed,
    }
    .generate()
}

/// Uncalibrated model: as [`gen_calibrated`], but the first target
/// coordinate has mean 0.1 whatever the predicted mean.
pub fn gen_uncalibrated(d: usize, n: usize, seed: u64) -> Result<Dataset> {
    ScenarioSpec {
        scenario: Scenario::UncalibratedGaussian { d },
        n,
        seed,
    }
    .generate()
}

/// `Y = sin(pi X) + |1 + X| eps` with `X ~ U(-1, 1)` and `eps ~ N(0, 0.15^2)`.
fn ols_pairs(n: usize, rng: &mut Stream) -> Vec<(f64, f64)> {
    (0..n)
        .map(|_| {
            let x: f64 = rng.random_range(-1.0..1.0);
            let eps: f64 = OLS_NOISE_STD * rng.sample::<f64, _>(StandardNormal);
            (x, (PI * x).sin() + (1.0 + x).abs() * eps)
        })
        .collect()
}

/// Simple linear regression with homoscedastic Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    /// Residual mean square `RSS / (n - 2)`.
    pub variance: f64,
}

impl OlsFit {
    pub fn fit(pairs: &[(f64, f64)]) -> Result<Self> {
        let n = pairs.len();
        if n < 3 {
            return Err(Error::Parameter("OLS needs at least three points".into()));
        }
        let nf = n as f64;
        let mx = pairs.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pairs.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        if !(sxx > 0.0) {
            return Err(Error::Numeric("OLS design is singular".into()));
        }
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = pairs.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
        Ok(OlsFit {
            intercept,
            slope,
            variance: rss / (nf - 2.0),
        })
    }

    pub fn predict(&self, x: f64) -> Result<Prediction> {
        Prediction::normal(self.intercept + self.slope * x, self.variance)
    }

    pub fn dataset(&self, pairs: &[(f64, f64)]) -> Result<Dataset> {
        Dataset::new(
            pairs
                .iter()
                .map(|&(x, y)| Ok((self.predict(x)?, Target::real(y))))
                .collect::<Result<_>>()?,
        )
    }
}

/// The regression example: training data, the fitted model and a
/// validation dataset of its predictions.
#[derive(Debug, Clone)]
pub struct OlsScenario {
    pub train: Vec<(f64, f64)>,
    pub validation_points: Vec<(f64, f64)>,
    pub fit: OlsFit,
    pub validation: Dataset,
}

pub fn gen_ols_scenario(seed: u64) -> Result<OlsScenario> {
    let train = ols_pairs(OLS_TRAINING_SIZE, &mut substream(seed, &[role::TRAINING]));
    let validation_points = ols_pairs(OLS_VALIDATION_SIZE, &mut substream(seed, &[role::VALIDATION]));
    let fit = OlsFit::fit(&train)?;
    let validation = fit.dataset(&validation_points)?;
    Ok(OlsScenario {
        train,
        validation_points,
        fit,
        validation,
    })
}

pub const FRIEDMAN_INPUTS: usize = 10;

/// Noiseless Friedman 1 response
/// `10 sin(pi x1 x2) + 20 (x3 - 0.5)^2 + 10 x4 + 5 x5`.
pub fn friedman1_response(x: &[f64; FRIEDMAN_INPUTS]) -> f64 {
    10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
}

fn friedman1_with(n: usize, noise_sd: f64, rng: &mut Stream) -> Vec<([f64; FRIEDMAN_INPUTS], f64)> {
    (0..n)
        .map(|_| {
            let mut x = [0.0; FRIEDMAN_INPUTS];
            x.iter_mut().for_each(|v| *v = rng.random_range(0.0..1.0));
            let eps: f64 = if noise_sd > 0.0 {
                noise_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            (x, friedman1_response(&x) + eps)
        })
        .collect()
}

/// Inputs uniform on `[0, 1]^10` and noisy Friedman 1 responses.
pub fn gen_friedman1(n: usize, noise_sd: f64, seed: u64) -> Result<Vec<([f64; FRIEDMAN_INPUTS], f64)>> {
    Scenario::Friedman1 { noise_sd }.validate()?;
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    Ok(friedman1_with(n, noise_sd, &mut substream(seed, &[role::DATASET])))
}

/// Gaussian model with mean linear in the inputs and constant variance, a
/// deliberately misspecified model of the Friedman 1 problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearGaussianModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub variance: f64,
}

impl LinearGaussianModel {
    pub fn fit(data: &[([f64; FRIEDMAN_INPUTS], f64)]) -> Result<Self> {
        let n = data.len();
        let p = FRIEDMAN_INPUTS + 1;
        if n <= p {
            return Err(Error::Parameter(format!("linear fit needs more than {p} points, got {n}")));
        }
        let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { data[i].0[j - 1] });
        let y = DVector::from_iterator(n, data.iter().map(|d| d.1));
        let qr = design.clone().qr();
        let beta = qr
            .r()
            .solve_upper_triangular(&(qr.q().transpose() * &y))
            .ok_or_else(|| Error::Numeric("linear fit design is rank deficient".into()))?;
        let residuals = &y - &design * &beta;
        Ok(LinearGaussianModel {
            intercept: beta[0],
            coefficients: beta.iter().skip(1).copied().collect(),
            variance: residuals.norm_squared() / (n - p) as f64,
        })
    }

    pub fn predict(&self, x: &[f64; FRIEDMAN_INPUTS]) -> Result<Prediction> {
        let mean = self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>();
        Prediction::normal(mean, self.variance)
    }

    pub fn dataset(&self, data: &[([f64; FRIEDMAN_INPUTS], f64)]) -> Result<Dataset> {
        Dataset::new(
            data.iter()
                .map(|(x, y)| Ok((self.predict(x)?, Target::real(*y))))
                .collect::<Result<_>>()?,
        )
    }
}

/// Test locations for the CME test: predictions `N(m, var I)` with
/// `m ~ U[0, 1]^d` and targets drawn from `N(0, target_var I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocationScheme {
    pub count: usize,
    pub var: f64,
    pub target_var: f64,
}

impl Default for LocationScheme {
    fn default() -> Self {
        LocationScheme {
            count: 10,
            var: 0.01,
            target_var: 0.01,
        }
    }
}

impl LocationScheme {
    pub fn generate_with(&self, d: usize, rng: &mut Stream) -> Result<TestLocations> {
        if self.count == 0 || d == 0 {
            return Err(Error::Parameter("need at least one location of dimension >= 1".into()));
        }
        let sd = self.target_var.sqrt();
        let locations = (0..self.count)
            .map(|_| {
                let m: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
                let y = (0..d).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
                Ok((Prediction::diag_normal(m, vec![self.var; d])?, Target::Reals(y)))
            })
            .collect::<Result<_>>()?;
        TestLocations::new(locations)
    }

    pub fn generate(&self, d: usize, seed: u64) -> Result<TestLocations> {
        self.generate_with(d, &mut substream(seed, &[role::LOCATIONS]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub mean: f64,
    pub std_error: f64,
}

/// Average of the U-statistic over independent datasets.
pub fn estimate_ground_truth(
    spec: &KernelSpec,
    scenario: Scenario,
    num_datasets: usize,
    n_per: usize,
    seed: u64,
) -> Result<GroundTruth> {
    if num_datasets == 0 {
        return Err(Error::Parameter("need at least one dataset".into()));
    }
    let values: Vec<f64> = (0..num_datasets)
        .into_par_iter()
        .map(|r| {
            let mut rng = substream(seed, &[role::GROUND_TRUTH, r as u64]);
            let data = scenario.generate_with(n_per, &mut rng)?;
            Ok(skce_u_stat(spec, &data)?.value)
        })
        .collect::<Result<_>>()?;
    let (mean, var) = mean_and_variance(&values);
    let std_error = if num_datasets > 1 { (var / num_datasets as f64).sqrt() } else { f64::NAN };
    Ok(GroundTruth { mean, std_error })
}

/// Estimator evaluated by the estimator sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "estimator", rename_all = "snake_case")]
pub enum EstimatorChoice {
    PlugIn,
    Block { block_size: usize },
    SqrtBlock,
    UStat,
}

impl EstimatorChoice {
    pub fn label(&self) -> String {
        match self {
            EstimatorChoice::PlugIn => "plug_in".into(),
            EstimatorChoice::Block { block_size } => format!("block_{block_size}"),
            EstimatorChoice::SqrtBlock => "block_sqrt".into(),
            EstimatorChoice::UStat => "u_stat".into(),
        }
    }
}

/// Test evaluated by the test sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum TestChoice {
    AsymptoticBlock { block_size: usize, variant: BlockVariance },
    SqrtBlock,
    Bootstrap { num_bootstrap: usize },
    Cme { scheme: LocationScheme },
}

impl TestChoice {
    pub fn label(&self) -> String {
        match self {
            TestChoice::AsymptoticBlock { block_size, variant } => match variant {
                BlockVariance::EmpiricalStd => format!("block_{block_size}"),
                BlockVariance::HSquared => format!("block_{block_size}_hsq"),
            },
            TestChoice::SqrtBlock => "block_sqrt".into(),
            TestChoice::Bootstrap { num_bootstrap } => format!("bootstrap_{num_bootstrap}"),
            TestChoice::Cme { scheme } => format!("cme_{}", scheme.count),
        }
    }

    /// Runs the test on one replicate; `rep_seed` drives resampling and
    /// location draws.
    pub fn run(&self, spec: &KernelSpec, data: &Dataset, rep_seed: u64) -> Result<TestReport> {
        match *self {
            TestChoice::AsymptoticBlock { block_size, variant } => {
                test_asymptotic_block(spec, data, block_size, variant)
            }
            TestChoice::SqrtBlock => test_asymptotic_sqrt_block(spec, data),
            TestChoice::Bootstrap { num_bootstrap } => test_bootstrap_u_stat(spec, data, num_bootstrap, rep_seed),
            TestChoice::Cme { scheme } => {
                let locs = scheme.generate(data.first_prediction().dim(), rep_seed)?;
                test_cme(spec, data, &locs)
            }
        }
    }
}

/// One cell of a benchmark grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub scenario: String,
    pub d: usize,
    pub n: usize,
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkResult {
    pub rows: Vec<BenchmarkRow>,
}

impl BenchmarkResult {
    pub fn get(&self, n: usize, method: &str, metric: &str) -> Option<&BenchmarkRow> {
        self.rows
            .iter()
            .find(|r| r.n == n && r.method == method && r.metric == metric)
    }
}

pub const DEFAULT_N_GRID: [usize; 5] = [4, 16, 64, 256, 1024];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorBenchmarkConfig {
    pub scenario: Scenario,
    pub kernel: KernelSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<EstimatorChoice>,
    pub seed: u64,
    /// Reference value; estimated with [`estimate_ground_truth`] from
    /// `ground_truth_datasets` datasets of 1000 points when absent.
    pub ground_truth: Option<f64>,
    pub ground_truth_datasets: usize,
    /// Adds wall-clock rows, which makes the output irreproducible.
    pub timing: bool,
}

impl EstimatorBenchmarkConfig {
    pub fn new(scenario: Scenario) -> Self {
        EstimatorBenchmarkConfig {
            scenario,
            kernel: KernelSpec::default(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            replicates: 200,
            methods: vec![
                EstimatorChoice::PlugIn,
                EstimatorChoice::Block { block_size: 2 },
                EstimatorChoice::SqrtBlock,
                EstimatorChoice::UStat,
            ],
            seed: 0,
            ground_truth: None,
            ground_truth_datasets: 100,
            timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestBenchmarkConfig {
    pub scenario: Scenario,
    pub kernel: KernelSpec,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub methods: Vec<TestChoice>,
    pub alpha: f64,
    pub seed: u64,
    pub timing: bool,
}

impl TestBenchmarkConfig {
    pub fn new(scenario: Scenario) -> Self {
        TestBenchmarkConfig {
            scenario,
            kernel: KernelSpec::default(),
            n_grid: DEFAULT_N_GRID.to_vec(),
            replicates: 200,
            methods: vec![
                TestChoice::AsymptoticBlock {
                    block_size: 2,
                    variant: BlockVariance::EmpiricalStd,
                },
                TestChoice::SqrtBlock,
                TestChoice::Bootstrap { num_bootstrap: 500 },
            ],
            alpha: 0.05,
            seed: 0,
            timing: false,
        }
    }
}

fn check_grid(n_grid: &[usize], replicates: usize) -> Result<()> {
    if n_grid.is_empty() || n_grid.contains(&0) {
        return Err(Error::Parameter("the n grid must be non-empty and positive".into()));
    }
    if replicates == 0 {
        return Err(Error::Parameter("at least one replicate is required".into()));
    }
    Ok(())
}

fn replicate_data(scenario: &Scenario, seed: u64, n: usize, r: usize) -> Result<Dataset> {
    scenario.generate_with(n, &mut substream(seed, &[role::DATASET, n as u64, r as u64]))
}

/// Runs `f` over all replicates at each `n` and returns per-replicate
/// outputs together with the elapsed seconds per `n`.
fn sweep<T: Send>(
    n_grid: &[usize],
    replicates: usize,
    f: impl Fn(usize, usize) -> Result<T> + Sync,
) -> Result<Vec<(usize, Vec<T>, f64)>> {
    n_grid
        .iter()
        .map(|&n| {
            let start = Instant::now();
            let out = (0..replicates).into_par_iter().map(|r| f(n, r)).collect::<Result<Vec<T>>>()?;
            Ok((n, out, start.elapsed().as_secs_f64()))
        })
        .collect()
}

fn row(scenario: &Scenario, n: usize, method: &str, metric: &str, value: f64, stderr: f64) -> BenchmarkRow {
    BenchmarkRow {
        scenario: scenario.name().into(),
        d: scenario.dim(),
        n,
        method: method.into(),
        metric: metric.into(),
        value,
        stderr,
    }
}

/// Mean absolute error and variance of the estimators against a reference
/// value, with exact `h`-evaluation counts.
pub fn run_estimator_benchmark(config: &EstimatorBenchmarkConfig) -> Result<BenchmarkResult> {
    check_grid(&config.n_grid, config.replicates)?;
    config.scenario.validate()?;
    config.kernel.validate()?;
    let truth = match config.ground_truth {
        Some(v) => v,
        None => {
            estimate_ground_truth(&config.kernel, config.scenario, config.ground_truth_datasets, 1000, config.seed)?.mean
        }
    };
    let mut result = BenchmarkResult::default();
    for method in &config.methods {
        let cells = sweep(&config.n_grid, config.replicates, |n, r| {
            let data = replicate_data(&config.scenario, config.seed, n, r)?;
            let report = match *method {
                EstimatorChoice::PlugIn => skce_plug_in(&config.kernel, &data),
                EstimatorChoice::Block { block_size } => skce_block(&config.kernel, &data, block_size),
                EstimatorChoice::SqrtBlock => skce_block(&config.kernel, &data, sqrt_block_size(n).min(n)),
                EstimatorChoice::UStat => skce_u_stat(&config.kernel, &data),
            };
            match report {
                Ok(rep) => Ok(Some((rep.value, rep.h_evaluations))),
                // Block sizes larger than n leave the cell empty.
                Err(Error::Parameter(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let label = method.label();
        for (n, outputs, seconds) in cells {
            let outputs: Vec<(f64, u64)> = outputs.into_iter().flatten().collect();
            if outputs.is_empty() {
                continue;
            }
            let m = outputs.len() as f64;
            let errors: Vec<f64> = outputs.iter().map(|o| (o.0 - truth).abs()).collect();
            let values: Vec<f64> = outputs.iter().map(|o| o.0).collect();
            let (mae, mae_var) = mean_and_variance(&errors);
            let (mean, var) = mean_and_variance(&values);
            let se = |v: f64| if outputs.len() > 1 { (v / m).sqrt() } else { f64::NAN };
            let s = &config.scenario;
            result.rows.push(row(s, n, &label, "mean", mean, se(var)));
            result.rows.push(row(s, n, &label, "mean_abs_error", mae, se(mae_var)));
            result.rows.push(row(s, n, &label, "variance", var, f64::NAN));
            result.rows.push(row(s, n, &label, "h_evaluations", outputs[0].1 as f64, 0.0));
            if config.timing {
                result.rows.push(row(s, n, &label, "wall_time_s", seconds / m, f64::NAN));
            }
        }
    }
    Ok(result)
}

/// Rejection rates of calibration tests at level `alpha`.
pub fn run_test_benchmark(config: &TestBenchmarkConfig) -> Result<BenchmarkResult> {
    check_grid(&config.n_grid, config.replicates)?;
    config.scenario.validate()?;
    config.kernel.validate()?;
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", config.alpha)));
    }
    let mut result = BenchmarkResult::default();
    for method in &config.methods {
        let cells = sweep(&config.n_grid, config.replicates, |n, r| {
            let data = replicate_data(&config.scenario, config.seed, n, r)?;
            let rep_seed = crate::rng::mix(config.seed, &[role::BOOTSTRAP, n as u64, r as u64]);
            match method.run(&config.kernel, &data, rep_seed) {
                Ok(report) => Ok(Some(report)),
                Err(Error::Parameter(_)) => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let label = method.label();
        for (n, reports, seconds) in cells {
            let reports: Vec<TestReport> = reports.into_iter().flatten().collect();
            if reports.is_empty() {
                continue;
            }
            let m = reports.len() as f64;
            let rate = reports.iter().filter(|r| r.rejects(config.alpha)).count() as f64 / m;
            let s = &config.scenario;
            result.rows.push(row(s, n, &label, "rejection_rate", rate, (rate * (1.0 - rate) / m).sqrt()));
            let p: Vec<f64> = reports.iter().map(|r| r.p_value).collect();
            let (mean_p, var_p) = mean_and_variance(&p);
            result.rows.push(row(s, n, &label, "mean_p_value", mean_p, (var_p / m).sqrt()));
            if let Some(h) = reports[0].diagnostics.get("h_evaluations") {
                result.rows.push(row(s, n, &label, "h_evaluations", *h, 0.0));
            }
            if config.timing {
                result.rows.push(row(s, n, &label, "wall_time_s", seconds / m, f64::NAN));
            }
        }
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calibrated_predictions_have_the_scenario_shape() {
        let d = gen_calibrated(3, 200, 1).unwrap();
        for (p, y) in d.pairs() {
            let Prediction::DiagNormal(n) = p else { panic!() };
            assert!(n.var().iter().all(|&v| v == 0.01));
            let c = n.mean()[0];
            assert!((0.0..1.0).contains(&c));
            assert!(n.mean().iter().all(|&m| m == c));
            assert_eq!(y.coordinates().len(), 3);
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(gen_calibrated(2, 50, 7).unwrap(), gen_calibrated(2, 50, 7).unwrap());
        assert_ne!(gen_calibrated(2, 50, 7).unwrap(), gen_calibrated(2, 50, 8).unwrap());
        let a = gen_ols_scenario(3).unwrap();
        let b = gen_ols_scenario(3).unwrap();
        assert_eq!(a.validation, b.validation);
    }

    #[test]
    fn uncalibrated_first_coordinate_ignores_the_prediction() {
        let d = gen_uncalibrated(2, 20_000, 2).unwrap();
        let n = d.len() as f64;
        let first: Vec<f64> = d.pairs().iter().map(|(_, y)| y.coordinates()[0]).collect();
        let (m, v) = mean_and_variance(&first);
        assert!((m - 0.1).abs() < 4.0 * (0.01 / n).sqrt());
        assert!((v - 0.01).abs() < 0.001);
        // Second coordinate residuals against the predicted mean are N(0, 0.01).
        let resid: Vec<f64> = d
            .pairs()
            .iter()
            .map(|(p, y)| y.coordinates()[1] - p.mean()[1])
            .collect();
        let (m, v) = mean_and_variance(&resid);
        assert!(m.abs() < 4.0 * (0.01 / n).sqrt());
        assert!((v - 0.01).abs() < 0.001);
    }

    #[test]
    fn ols_matches_normal_equations() {
        let s = gen_ols_scenario(11).unwrap();
        assert_eq!(s.train.len(), 100);
        assert_eq!(s.validation.len(), 50);
        // Solve (X'X) b = X'y directly.
        let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, y) in &s.train {
            a00 += 1.0;
            a01 += x;
            a11 += x * x;
            b0 += y;
            b1 += x * y;
        }
        let det = a00 * a11 - a01 * a01;
        let intercept = (a11 * b0 - a01 * b1) / det;
        let slope = (a00 * b1 - a01 * b0) / det;
        assert!((s.fit.intercept - intercept).abs() < 1e-10);
        assert!((s.fit.slope - slope).abs() < 1e-10);
        let rss: f64 = s.train.iter().map(|&(x, y)| (y - intercept - slope * x).powi(2)).sum();
        assert!((s.fit.variance - rss / 98.0).abs() < 1e-12);
        let var0 = match s.validation.prediction(0) {
            Prediction::DiagNormal(n) => n.var()[0],
            _ => panic!(),
        };
        for (p, _) in s.validation.pairs() {
            let Prediction::DiagNormal(n) = p else { panic!() };
            assert_eq!(n.var()[0], var0);
        }
    }

    #[test]
    fn friedman_examples() {
        let x = [0.5; 10];
        assert!((friedman1_response(&x) - 14.571_067_811_865_476).abs() < 1e-12);
        let mut y = x;
        y[5..].iter_mut().for_each(|v| *v = 0.9);
        assert_eq!(friedman1_response(&x), friedman1_response(&y));
        let data = gen_friedman1(100, 0.0, 4).unwrap();
        for (x, y) in &data {
            assert_eq!(*y, friedman1_response(x));
            assert!(x.iter().all(|v| (0.0..1.0).contains(v)));
        }
        assert!(gen_friedman1(10, -1.0, 1).is_err());
    }

    #[test]
    fn linear_model_recovers_linear_data() {
        let mut data = gen_friedman1(200, 0.0, 5).unwrap();
        for (x, y) in data.iter_mut() {
            *y = 1.0 + 2.0 * x[0] - 3.0 * x[9];
        }
        let m = LinearGaussianModel::fit(&data).unwrap();
        assert!((m.intercept - 1.0).abs() < 1e-10, "{m:?}");
        assert!((m.coefficients[0] - 2.0).abs() < 1e-10);
        assert!((m.coefficients[9] + 3.0).abs() < 1e-10);
        assert!(m.variance < 1e-20);
    }

    #[test]
    fn friedman_scenario_produces_normal_predictions() {
        let spec = ScenarioSpec {
            scenario: Scenario::Friedman1 { noise_sd: 1.0 },
            n: 30,
            seed: 3,
        };
        let d = spec.generate().unwrap();
        assert_eq!(d.len(), 30);
        assert!(d.first_prediction().is_univariate());
    }

    #[test]
    fn locations_follow_the_scheme() {
        let locs = LocationScheme::default().generate(2, 9).unwrap();
        assert_eq!(locs.len(), 10);
        for (p, y) in locs.locations() {
            let Prediction::DiagNormal(n) = p else { panic!() };
            assert!(n.mean().iter().all(|m| (0.0..1.0).contains(m)));
            assert_eq!(n.var(), &[0.01, 0.01]);
            assert_eq!(y.coordinates().len(), 2);
        }
    }

    #[test]
    fn ground_truth_is_deterministic_and_zero_when_calibrated() {
        let spec = KernelSpec::default();
        let s = Scenario::CalibratedGaussian { d: 1 };
        let a = estimate_ground_truth(&spec, s, 200, 50, 1).unwrap();
        assert_eq!(a, estimate_ground_truth(&spec, s, 200, 50, 1).unwrap());
        assert!(a.mean.abs() < 3.0 * a.std_error);
    }

    #[test]
    fn uncalibrated_ground_truth_is_positive() {
        let spec = KernelSpec::default();
        let g = estimate_ground_truth(&spec, Scenario::UncalibratedGaussian { d: 1 }, 100, 200, 2).unwrap();
        assert!(g.mean > 5.0 * g.std_error, "{g:?}");
    }

    #[test]
    fn estimator_benchmark_counts() {
        let mut config = EstimatorBenchmarkConfig::new(Scenario::CalibratedGaussian { d: 1 });
        config.n_grid = vec![16, 64];
        config.replicates = 20;
        config.ground_truth = Some(0.0);
        config.methods.push(EstimatorChoice::Block { block_size: 32 });
        let r = run_estimator_benchmark(&config).unwrap();
        assert_eq!(r.get(64, "block_2", "h_evaluations").unwrap().value, 32.0);
        assert_eq!(r.get(64, "u_stat", "h_evaluations").unwrap().value, 2016.0);
        assert_eq!(r.get(64, "block_sqrt", "h_evaluations").unwrap().value, 8.0 * 28.0);
        assert_eq!(r.get(64, "plug_in", "h_evaluations").unwrap().value, 4096.0);
        assert!(r.get(16, "block_32", "mean").is_none());
        assert!(r.rows.iter().all(|row| row.metric != "wall_time_s"));
        assert_eq!(format!("{r:?}"), format!("{:?}", run_estimator_benchmark(&config).unwrap()));
        config.n_grid = vec![];
        assert!(matches!(run_estimator_benchmark(&config), Err(Error::Parameter(_))));
    }

    #[test]
    fn test_benchmark_rates_are_probabilities() {
        let mut config = TestBenchmarkConfig::new(Scenario::UncalibratedGaussian { d: 1 });
        config.n_grid = vec![64];
        config.replicates = 10;
        config.methods.push(TestChoice::Cme {
            scheme: LocationScheme::default(),
        });
        let r = run_test_benchmark(&config).unwrap();
        for row in r.rows.iter().filter(|r| r.metric == "rejection_rate") {
            assert!((0.0..=1.0).contains(&row.value));
        }
        assert_eq!(r.get(64, "bootstrap_500", "rejection_rate").unwrap().value, 1.0);
        assert_eq!(r, run_test_benchmark(&config).unwrap());
    }
}
