//! Calibration tests of the null hypothesis that the model is calibrated.
//!
//! All tests are one-sided: only large positive calibration error estimates
//! count as evidence against calibration.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{check_finite, h_matrix, h_squared_hat, skce_block, ucme_features, Dataset, TestLocations};
use crate::kernels::KernelSpec;
use crate::rng::{role, substream};
use crate::special::{chi_squared_sf, pairwise_sum, std_normal_cdf};

/// Largest dataset accepted by the bootstrap test, which stores all `n^2`
/// values of `h`.
pub const MAX_BOOTSTRAP_SIZE: usize = 16_384;

/// Smallest accepted number of bootstrap resamples.
pub const MIN_BOOTSTRAP: usize = 100;

/// Condition number of the CME covariance above which a ridge is added.
pub const CME_MAX_CONDITION: f64 = 1e12;

/// Estimate of the block-estimator standard deviation in the asymptotic test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockVariance {
    /// Sample standard deviation of the block estimates.
    EmpiricalStd,
    /// `sqrt(2 E h^2 / (B (B - 1)))` with `E h^2` estimated over all pairs.
    HSquared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum TestMethod {
    AsymptoticBlock { block_size: usize, variant: BlockVariance },
    AsymptoticSqrtBlock { block_size: usize },
    BootstrapUStat { num_bootstrap: usize },
    Cme { locations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    #[serde(flatten)]
    pub method: TestMethod,
    pub n: usize,
    pub statistic: f64,
    pub p_value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl TestReport {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Asymptotic test based on the block estimator with fixed block size.
pub fn test_asymptotic_block(
    spec: &KernelSpec,
    data: &Dataset,
    block_size: usize,
    variant: BlockVariance,
) -> Result<TestReport> {
    let n = data.len();
    if block_size >= 2 && block_size <= n && variant == BlockVariance::EmpiricalStd && n / block_size < 2 {
        return Err(Error::Parameter(format!(
            "the empirical-std variant needs at least two blocks, got n = {n}, B = {block_size}"
        )));
    }
    let estimate = skce_block(spec, data, block_size)?;
    let blocks = n / block_size;
    let skce = estimate.value;
    let mut diagnostics = BTreeMap::new();
    let mut evaluations = estimate.h_evaluations;
    let (sigma, scale) = match variant {
        BlockVariance::EmpiricalStd => (estimate.sigma_hat_b.expect("two or more blocks"), (blocks as f64).sqrt()),
        BlockVariance::HSquared => {
            let h2 = h_squared_hat(spec, data)?;
            evaluations += (n * (n - 1) / 2) as u64;
            diagnostics.insert("h_squared_hat".into(), h2);
            let b = block_size as f64;
            (h2.sqrt(), (blocks as f64 * b * (b - 1.0)).sqrt() / std::f64::consts::SQRT_2)
        }
    };
    diagnostics.insert("skce".into(), skce);
    diagnostics.insert("sigma_hat".into(), sigma);
    diagnostics.insert("blocks".into(), blocks as f64);
    diagnostics.insert("h_evaluations".into(), evaluations as f64);
    let (statistic, p_value) = if sigma > 0.0 {
        let t = scale * skce / sigma;
        (t, std_normal_cdf(-t))
    } else {
        diagnostics.insert("degenerate".into(), 1.0);
        if skce > 0.0 {
            (f64::INFINITY, 0.0)
        } else if skce < 0.0 {
            (f64::NEG_INFINITY, 1.0)
        } else {
            (0.0, 1.0)
        }
    };
    Ok(TestReport {
        method: TestMethod::AsymptoticBlock { block_size, variant },
        n,
        statistic,
        p_value,
        seed: None,
        diagnostics,
    })
}

/// Block size of the increasing-block test: `max(2, floor(sqrt(n)))`.
pub fn sqrt_block_size(n: usize) -> usize {
    n.isqrt().max(2)
}

/// Asymptotic test with blocks of size `floor(sqrt(n))`.
pub fn test_asymptotic_sqrt_block(spec: &KernelSpec, data: &Dataset) -> Result<TestReport> {
    let n = data.len();
    if n < 8 {
        return Err(Error::Parameter(format!("the sqrt-block test needs n >= 8, got {n}")));
    }
    let block_size = sqrt_block_size(n);
    let mut report = test_asymptotic_block(spec, data, block_size, BlockVariance::EmpiricalStd)?;
    report.method = TestMethod::AsymptoticSqrtBlock { block_size };
    Ok(report)
}

/// Bootstrap approximation of the null law of `n` times the U-statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistributionSample {
    pub draws: Vec<f64>,
}

/// Doubly centered `h` matrix: `h(a,b) - r_a - r_b + m` with row means `r`
/// and grand mean `m`.
fn doubly_center(h: &mut [f64], n: usize) {
    let rows: Vec<f64> = h.chunks(n).map(|r| pairwise_sum(r) / n as f64).collect();
    let grand = pairwise_sum(&rows) / n as f64;
    for (a, row) in h.chunks_mut(n).enumerate() {
        for (b, v) in row.iter_mut().enumerate() {
            *v += grand - rows[a] - rows[b];
        }
    }
}

/// One centered-bootstrap draw: resample `n` indices with replacement and
/// return `(n - 1)^-1 sum_{a != b} hc(i*_a, i*_b)` through the multiplicities.
fn bootstrap_draw<R: Rng>(hc: &[f64], n: usize, rng: &mut R, counts: &mut [f64]) -> f64 {
    counts.iter_mut().for_each(|c| *c = 0.0);
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1.0;
    }
    let mut total = 0.0;
    for (k, &w) in counts.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = &hc[k * n..(k + 1) * n];
        let dot: f64 = row.iter().zip(counts.iter()).map(|(a, b)| a * b).sum();
        total += w * (dot - row[k]);
    }
    total / (n - 1) as f64
}

fn bootstrap_null(hc: &[f64], n: usize, num_bootstrap: usize, seed: u64) -> NullDistributionSample {
    let draws = (0..num_bootstrap)
        .into_par_iter()
        .map_init(
            || vec![0.0; n],
            |counts, b| {
                let mut rng = substream(seed, &[role::BOOTSTRAP, b as u64]);
                bootstrap_draw(hc, n, &mut rng, counts)
            },
        )
        .collect();
    NullDistributionSample { draws }
}

/// Statistic and bootstrap null sample for the U-statistic test, returned
/// together with the number of `h` evaluations.
pub fn bootstrap_null_sample(
    spec: &KernelSpec,
    data: &Dataset,
    num_bootstrap: usize,
    seed: u64,
) -> Result<(f64, NullDistributionSample, u64)> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Parameter("the bootstrap test needs at least two pairs".into()));
    }
    if num_bootstrap < MIN_BOOTSTRAP {
        return Err(Error::Parameter(format!(
            "at least {MIN_BOOTSTRAP} bootstrap resamples are required, got {num_bootstrap}"
        )));
    }
    if n > MAX_BOOTSTRAP_SIZE {
        return Err(Error::Configuration(format!(
            "the bootstrap test stores n^2 kernel values; n = {n} exceeds {MAX_BOOTSTRAP_SIZE}, \
             use a block test instead"
        )));
    }
    data.check_kernel(spec)?;
    let mut h = h_matrix(spec, data)?;
    // Same summation order as the U-statistic estimator.
    let rows: Vec<f64> = (0..n).map(|i| pairwise_sum(&h[i * n + i + 1..(i + 1) * n])).collect();
    let u = pairwise_sum(&rows) / (n * (n - 1) / 2) as f64;
    let statistic = check_finite(n as f64 * u, "bootstrap statistic")?;
    doubly_center(&mut h, n);
    let null = bootstrap_null(&h, n, num_bootstrap, seed);
    Ok((statistic, null, (n * (n + 1) / 2) as u64))
}

/// Add-one Monte-Carlo p-value `(1 + #{draws >= statistic}) / (B + 1)`.
pub fn monte_carlo_p_value(statistic: f64, draws: &[f64]) -> f64 {
    let exceed = draws.iter().filter(|&&d| d >= statistic).count();
    (1 + exceed) as f64 / (draws.len() + 1) as f64
}

/// Test based on `n` times the U-statistic with a centered-bootstrap null.
pub fn test_bootstrap_u_stat(spec: &KernelSpec, data: &Dataset, num_bootstrap: usize, seed: u64) -> Result<TestReport> {
    let (statistic, null, evaluations) = bootstrap_null_sample(spec, data, num_bootstrap, seed)?;
    let p_value = monte_carlo_p_value(statistic, &null.draws);
    let n = data.len();
    let (mean, var) = crate::special::mean_and_variance(&null.draws);
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("skce".into(), statistic / n as f64);
    diagnostics.insert("null_mean".into(), mean);
    diagnostics.insert("null_std".into(), var.sqrt());
    diagnostics.insert("h_evaluations".into(), evaluations as f64);
    Ok(TestReport {
        method: TestMethod::BootstrapUStat { num_bootstrap },
        n,
        statistic,
        p_value,
        seed: Some(seed),
        diagnostics,
    })
}

/// Hotelling statistic `n zbar' S^-1 zbar` of per-point feature vectors.
/// Returns the statistic and whether a ridge was needed.
pub fn hotelling_statistic(features: &[Vec<f64>]) -> Result<(f64, bool)> {
    let n = features.len();
    let j = features.first().map_or(0, Vec::len);
    if j == 0 || n <= j {
        return Err(Error::Parameter(format!(
            "Hotelling's statistic needs n > J >= 1, got n = {n}, J = {j}"
        )));
    }
    let z = DMatrix::from_fn(n, j, |i, c| features[i][c]);
    let mean: DVector<f64> = DVector::from_fn(j, |c, _| {
        let column: Vec<f64> = z.column(c).iter().copied().collect();
        pairwise_sum(&column) / n as f64
    });
    let mut centered = z;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut cov = centered.transpose() * &centered / (n - 1) as f64;
    let trace = cov.trace();
    if !trace.is_finite() || !mean.iter().all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite CME features".into()));
    }
    if trace == 0.0 {
        // All feature vectors coincide.
        let q = if mean.iter().all(|&v| v == 0.0) { 0.0 } else { f64::INFINITY };
        return Ok((q, true));
    }
    let eig = SymmetricEigen::new(cov.clone());
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let ridge = !(min > 0.0) || max / min > CME_MAX_CONDITION;
    if ridge {
        let r = 1e-10 * trace / j as f64;
        for c in 0..j {
            cov[(c, c)] += r;
        }
    }
    let chol = cov
        .cholesky()
        .ok_or_else(|| Error::Numeric("CME covariance is not positive definite".into()))?;
    let solved = chol.solve(&mean);
    let q = n as f64 * mean.dot(&solved);
    Ok((q.max(0.0), ridge))
}

/// Calibration mean embedding test with a chi-squared null of `J` degrees of freedom.
pub fn test_cme(spec: &KernelSpec, data: &Dataset, locs: &TestLocations) -> Result<TestReport> {
    let n = data.len();
    let j = locs.len();
    if n <= j {
        return Err(Error::Parameter(format!("the CME test needs n > J, got n = {n}, J = {j}")));
    }
    let features = ucme_features(spec, data, locs)?;
    let (statistic, ridge) = hotelling_statistic(&features)?;
    let mut diagnostics = BTreeMap::new();
    diagnostics.insert("ridge".into(), if ridge { 1.0 } else { 0.0 });
    diagnostics.insert("kernel_evaluations".into(), (n * j) as f64);
    Ok(TestReport {
        method: TestMethod::Cme { locations: j },
        n,
        statistic,
        p_value: chi_squared_sf(statistic, j),
        seed: None,
        diagnostics,
    })
}
