//! SKCE and UCME estimators.
//!
//! All estimators are built from the `h` function of a [`KernelSpec`]. Sums
//! are formed row by row in data order and combined with
//! [`pairwise_sum`], so results do not depend on the number of threads.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Prediction, Target};
use crate::error::{Error, Result};
use crate::kernels::{truncation_error_bound, KernelSpec};
use crate::special::pairwise_sum;

static H_CALLS: AtomicU64 = AtomicU64::new(0);

/// Process-wide number of `h` evaluations performed by the estimators and
/// tests so far. Concurrent callers share the counter.
pub fn h_calls() -> u64 {
    H_CALLS.load(Ordering::Relaxed)
}

/// A sample of `(prediction, target)` pairs sharing one target space.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pairs: Vec<(Prediction, Target)>,
}

impl Dataset {
    pub fn new(pairs: Vec<(Prediction, Target)>) -> Result<Self> {
        check_pairs(&pairs, "dataset")?;
        Ok(Dataset { pairs })
    }

    pub fn from_parts(predictions: Vec<Prediction>, targets: Vec<Target>) -> Result<Self> {
        if predictions.len() != targets.len() {
            return Err(Error::Dimension(format!(
                "{} predictions but {} targets",
                predictions.len(),
                targets.len()
            )));
        }
        Dataset::new(predictions.into_iter().zip(targets).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    /// Always false; datasets hold at least one pair.
    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(Prediction, Target)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(Prediction, Target)> {
        self.pairs
    }

    pub fn prediction(&self, i: usize) -> &Prediction {
        &self.pairs[i].0
    }

    pub fn target(&self, i: usize) -> &Target {
        &self.pairs[i].1
    }

    /// A representative prediction, used for family checks.
    pub fn first_prediction(&self) -> &Prediction {
        &self.pairs[0].0
    }

    /// The dataset reordered by `order`, which may repeat indices.
    pub fn select(&self, order: &[usize]) -> Result<Dataset> {
        Dataset::new(order.iter().map(|&i| self.pairs[i].clone()).collect())
    }

    /// Checks every prediction against the kernel.
    pub fn check_kernel(&self, spec: &KernelSpec) -> Result<()> {
        spec.validate()?;
        for (p, _) in &self.pairs {
            spec.check_prediction(p)?;
        }
        Ok(())
    }

    fn h(&self, spec: &KernelSpec, i: usize, j: usize) -> Result<f64> {
        H_CALLS.fetch_add(1, Ordering::Relaxed);
        let (p, y) = &self.pairs[i];
        let (q, z) = &self.pairs[j];
        spec.eval_h(p, y, q, z)
    }

    fn truncation_bound(&self) -> f64 {
        self.pairs
            .iter()
            .map(|(p, _)| truncation_error_bound(p))
            .fold(0.0, f64::max)
    }
}

fn check_pairs(pairs: &[(Prediction, Target)], what: &str) -> Result<()> {
    let Some((first, _)) = pairs.first() else {
        return Err(Error::Parameter(format!("{what} must contain at least one pair")));
    };
    for (i, (p, y)) in pairs.iter().enumerate() {
        if !p.compatible_with(first) {
            return Err(Error::Family(format!(
                "{what} entry {i} is a {} prediction of dimension {}, expected {} of dimension {}",
                p.family(),
                p.dim(),
                first.family(),
                first.dim()
            )));
        }
        p.check_target(y)?;
    }
    Ok(())
}

/// Test locations `T_1, ..., T_J` for the UCME and the CME test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestLocations {
    locations: Vec<(Prediction, Target)>,
}

impl TestLocations {
    pub fn new(locations: Vec<(Prediction, Target)>) -> Result<Self> {
        check_pairs(&locations, "test locations")?;
        Ok(TestLocations { locations })
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[(Prediction, Target)] {
        &self.locations
    }
}

/// Which estimator produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    PlugIn,
    Block { block_size: usize },
    UStat,
    Ucme { locations: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    #[serde(flatten)]
    pub kind: EstimatorKind,
    pub n: usize,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_estimates: Option<Vec<f64>>,
    /// Sample standard deviation of the block estimates.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_hat_b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h_squared_hat: Option<f64>,
    /// Per-location means of the UCME witness differences.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location_means: Option<Vec<f64>>,
    /// Number of `h` evaluations (kernel evaluations for the UCME).
    pub h_evaluations: u64,
    pub diagnostics: BTreeMap<String, f64>,
}

impl EstimateReport {
    fn new(kind: EstimatorKind, n: usize, value: f64, h_evaluations: u64) -> Self {
        EstimateReport {
            kind,
            n,
            value,
            block_estimates: None,
            sigma_hat_b: None,
            h_squared_hat: None,
            location_means: None,
            h_evaluations,
            diagnostics: BTreeMap::new(),
        }
    }

    fn with_truncation(mut self, data: &Dataset) -> Self {
        let bound = data.truncation_bound();
        if bound > 0.0 {
            self.diagnostics.insert("truncation_error_bound".into(), bound);
        }
        self
    }
}

/// Biased plug-in estimator `n^-2 sum_{i,j} h(i, j)` over all ordered pairs.
pub fn skce_plug_in(spec: &KernelSpec, data: &Dataset) -> Result<EstimateReport> {
    data.check_kernel(spec)?;
    let n = data.len();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let row = (0..n).map(|j| data.h(spec, i, j)).collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&row))
        })
        .collect::<Result<_>>()?;
    let raw = pairwise_sum(&rows) / (n * n) as f64;
    check_finite(raw, "plug-in estimate")?;
    let mut report = EstimateReport::new(EstimatorKind::PlugIn, n, raw.max(0.0), (n * n) as u64);
    report.diagnostics.insert("raw_value".into(), raw);
    Ok(report.with_truncation(data))
}

/// Sum of `f(h(i, j))` over `start <= i < j < end`, by rows.
fn upper_sum(
    spec: &KernelSpec,
    data: &Dataset,
    start: usize,
    end: usize,
    f: impl Fn(f64) -> f64 + Sync,
) -> Result<f64> {
    let rows: Vec<f64> = (start..end)
        .into_par_iter()
        .map(|i| {
            let row = (i + 1..end)
                .map(|j| data.h(spec, i, j).map(&f))
                .collect::<Result<Vec<_>>>()?;
            Ok(pairwise_sum(&row))
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&rows))
}

fn pairs(b: usize) -> usize {
    b * (b - 1) / 2
}

/// Unbiased block estimator: the mean of the within-block U-statistics of
/// `n / B` disjoint consecutive blocks. Trailing points are unused.
pub fn skce_block(spec: &KernelSpec, data: &Dataset, block_size: usize) -> Result<EstimateReport> {
    let n = data.len();
    if block_size < 2 || block_size > n {
        return Err(Error::Parameter(format!(
            "block size must satisfy 2 <= B <= n = {n}, got B = {block_size}"
        )));
    }
    data.check_kernel(spec)?;
    let blocks = n / block_size;
    let norm = pairs(block_size) as f64;
    let estimates: Vec<f64> = if block_size * 4 <= n {
        // Many small blocks: parallelize across blocks.
        (0..blocks)
            .into_par_iter()
            .map(|b| block_sum_serial(spec, data, b * block_size, (b + 1) * block_size).map(|s| s / norm))
            .collect::<Result<_>>()?
    } else {
        (0..blocks)
            .map(|b| upper_sum(spec, data, b * block_size, (b + 1) * block_size, |h| h).map(|s| s / norm))
            .collect::<Result<_>>()?
    };
    let value = pairwise_sum(&estimates) / blocks as f64;
    check_finite(value, "block estimate")?;
    let mut report = EstimateReport::new(
        EstimatorKind::Block { block_size },
        n,
        value,
        (blocks * pairs(block_size)) as u64,
    );
    if blocks >= 2 {
        let var = estimates.iter().map(|e| (e - value).powi(2)).sum::<f64>() / (blocks - 1) as f64;
        report.sigma_hat_b = Some(var.sqrt());
    }
    report.block_estimates = Some(estimates);
    report.diagnostics.insert("blocks".into(), blocks as f64);
    report.diagnostics.insert("unused_points".into(), (n % block_size) as f64);
    Ok(report.with_truncation(data))
}

fn block_sum_serial(spec: &KernelSpec, data: &Dataset, start: usize, end: usize) -> Result<f64> {
    let mut terms = Vec::with_capacity(pairs(end - start));
    for i in start..end {
        for j in i + 1..end {
            terms.push(data.h(spec, i, j)?);
        }
    }
    Ok(pairwise_sum(&terms))
}

/// Minimum-variance unbiased estimator; the block estimator with `B = n`.
pub fn skce_u_stat(spec: &KernelSpec, data: &Dataset) -> Result<EstimateReport> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Parameter("the U-statistic needs at least two pairs".into()));
    }
    let mut report = skce_block(spec, data, n)?;
    report.kind = EstimatorKind::UStat;
    Ok(report)
}

/// Mean of `h^2` over unordered pairs, an estimate of `E h^2`.
pub fn h_squared_hat(spec: &KernelSpec, data: &Dataset) -> Result<f64> {
    let n = data.len();
    if n < 2 {
        return Err(Error::Parameter("h-squared estimate needs at least two pairs".into()));
    }
    data.check_kernel(spec)?;
    let value = upper_sum(spec, data, 0, n, |h| h * h)? / pairs(n) as f64;
    check_finite(value, "h-squared estimate")?;
    Ok(value)
}

/// Witness differences `k(T_j, (P_i, Y_i)) - E_{Z ~ P_i} k(T_j, (P_i, Z))`
/// as an `n x J` row-major matrix.
pub fn ucme_features(spec: &KernelSpec, data: &Dataset, locs: &TestLocations) -> Result<Vec<Vec<f64>>> {
    let first = data.first_prediction();
    let loc = &locs.locations()[0].0;
    if !loc.compatible_with(first) {
        return Err(Error::Family(format!(
            "test locations are {} predictions of dimension {}, data are {} of dimension {}",
            loc.family(),
            loc.dim(),
            first.family(),
            first.dim()
        )));
    }
    data.check_kernel(spec)?;
    for (t, _) in locs.locations() {
        spec.check_prediction(t)?;
    }
    data.pairs()
        .par_iter()
        .map(|(p, y)| {
            locs.locations()
                .iter()
                .map(|(t, u)| {
                    let kp = spec.prediction.eval(t, p)?;
                    Ok(kp * (spec.target.eval(u, y)? - spec.expect_target(p, u)?))
                })
                .collect()
        })
        .collect()
}

/// Plug-in estimator of the squared unnormalized calibration mean embedding
/// at the given test locations.
pub fn ucme_squared(spec: &KernelSpec, data: &Dataset, locs: &TestLocations) -> Result<EstimateReport> {
    let features = ucme_features(spec, data, locs)?;
    let n = data.len();
    let j = locs.len();
    let means: Vec<f64> = (0..j)
        .map(|c| {
            let column: Vec<f64> = features.iter().map(|row| row[c]).collect();
            pairwise_sum(&column) / n as f64
        })
        .collect();
    let value = means.iter().map(|m| m * m).sum::<f64>() / j as f64;
    check_finite(value, "UCME estimate")?;
    let mut report = EstimateReport::new(EstimatorKind::Ucme { locations: j }, n, value, (n * j) as u64);
    report.location_means = Some(means);
    Ok(report.with_truncation(data))
}

pub(crate) fn check_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("{what} is not finite ({value})")))
    }
}

/// Full symmetric matrix of `h` values, diagonal included, in row-major order.
pub(crate) fn h_matrix(spec: &KernelSpec, data: &Dataset) -> Result<Vec<f64>> {
    let n = data.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| data.h(spec, i, j)).collect())
        .collect::<Result<_>>()?;
    let mut h = vec![0.0; n * n];
    for (i, row) in upper.iter().enumerate() {
        for (offset, &v) in row.iter().enumerate() {
            let j = i + offset;
            check_finite(v, "h value")?;
            h[i * n + j] = v;
            h[j * n + i] = v;
        }
    }
    Ok(h)
}
