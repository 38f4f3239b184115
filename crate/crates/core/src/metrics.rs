//! Classical calibration diagnostics that do not use kernels.

use serde::{Deserialize, Serialize};

use crate::distributions::{Prediction, Target};
use crate::error::{Error, Result};
use crate::estimators::Dataset;
use crate::special::pairwise_sum;

/// Default quantile levels `0.05, 0.10, ..., 0.95`.
pub fn default_taus() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

fn discrete_masses(p: &Prediction) -> Result<&[f64]> {
    match p {
        Prediction::Categorical(c) => Ok(c.probs()),
        Prediction::TruncatedCountable(t) => Ok(t.probs()),
        other => Err(Error::Unsupported(format!(
            "oracle calibration errors need discrete predictions, got {}",
            other.family()
        ))),
    }
}

/// Elementwise differences of two mass vectors on the union of their supports.
fn aligned_differences(p: &Prediction, truth: &Prediction) -> Result<Vec<f64>> {
    if !truth.compatible_with(p) {
        return Err(Error::Family(format!(
            "oracle returned a {} distribution for a {} prediction",
            truth.family(),
            p.family()
        )));
    }
    let a = discrete_masses(p)?;
    let b = discrete_masses(truth)?;
    let len = a.len().max(b.len());
    Ok((0..len)
        .map(|k| b.get(k).copied().unwrap_or(0.0) - a.get(k).copied().unwrap_or(0.0))
        .collect())
}

/// Empirical oracle calibration error: the mean over the dataset of
/// `||oracle(P_i) - P_i||_q^q`.
pub fn oracle_ece(
    data: &Dataset,
    oracle: impl Fn(&Prediction) -> Result<Prediction>,
    q: f64,
) -> Result<f64> {
    oracle_ece_paired(data, &oracle_outputs(data, oracle)?, q)
}

/// [`oracle_ece`] with the oracle conditionals given in dataset order.
pub fn oracle_ece_paired(data: &Dataset, oracles: &[Prediction], q: f64) -> Result<f64> {
    if !(q > 1.0) || !q.is_finite() {
        return Err(Error::Parameter(format!("norm exponent must lie in (1, inf), got {q}")));
    }
    check_oracle_len(data, oracles)?;
    let terms = data
        .pairs()
        .iter()
        .zip(oracles)
        .map(|((p, _), truth)| {
            let diff = aligned_differences(p, truth)?;
            Ok(diff.iter().map(|d| d.abs().powf(q)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) / data.len() as f64)
}

/// Empirical maximum calibration error: the largest sup-norm discrepancy
/// between the oracle conditional and the prediction.
pub fn oracle_mce(data: &Dataset, oracle: impl Fn(&Prediction) -> Result<Prediction>) -> Result<f64> {
    oracle_mce_paired(data, &oracle_outputs(data, oracle)?)
}

/// [`oracle_mce`] with the oracle conditionals given in dataset order.
pub fn oracle_mce_paired(data: &Dataset, oracles: &[Prediction]) -> Result<f64> {
    check_oracle_len(data, oracles)?;
    let mut max: f64 = 0.0;
    for ((p, _), truth) in data.pairs().iter().zip(oracles) {
        let diff = aligned_differences(p, truth)?;
        max = diff.iter().fold(max, |m, d| m.max(d.abs()));
    }
    Ok(max)
}

fn oracle_outputs(data: &Dataset, oracle: impl Fn(&Prediction) -> Result<Prediction>) -> Result<Vec<Prediction>> {
    data.pairs().iter().map(|(p, _)| oracle(p)).collect()
}

fn check_oracle_len(data: &Dataset, oracles: &[Prediction]) -> Result<()> {
    if oracles.len() != data.len() {
        return Err(Error::Dimension(format!(
            "{} oracle conditionals for {} predictions",
            oracles.len(),
            data.len()
        )));
    }
    Ok(())
}

/// Confidence-binned ECE of a classifier with `num_bins` equal-width bins
/// on `[0, 1]`.
pub fn binned_confidence_ece(data: &Dataset, num_bins: usize) -> Result<f64> {
    if num_bins == 0 {
        return Err(Error::Parameter("at least one bin is required".into()));
    }
    let mut count = vec![0usize; num_bins];
    let mut correct = vec![0usize; num_bins];
    let mut confidence = vec![0.0; num_bins];
    for (p, y) in data.pairs() {
        let (Prediction::Categorical(c), Target::Class(label)) = (p, y) else {
            return Err(Error::Unsupported(format!(
                "binned ECE needs categorical predictions, got {}",
                p.family()
            )));
        };
        let (top, conf) = c
            .probs()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, v)| if v > best.1 { (k, v) } else { best });
        let bin = ((conf * num_bins as f64) as usize).min(num_bins - 1);
        count[bin] += 1;
        confidence[bin] += conf;
        if top == *label {
            correct[bin] += 1;
        }
    }
    let n = data.len() as f64;
    Ok((0..num_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| {
            let m = count[b] as f64;
            m / n * (correct[b] as f64 / m - confidence[b] / m).abs()
        })
        .sum())
}

/// Empirical cumulative probabilities `n^-1 #{i : F_i(Y_i) <= tau}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub taus: Vec<f64>,
    pub empirical: Vec<f64>,
}

impl QuantileCurve {
    /// Mean absolute deviation from the diagonal.
    pub fn mean_abs_deviation(&self) -> f64 {
        self.taus.iter().zip(&self.empirical).map(|(t, e)| (e - t).abs()).sum::<f64>() / self.taus.len() as f64
    }

    pub fn max_abs_deviation(&self) -> f64 {
        self.taus.iter().zip(&self.empirical).map(|(t, e)| (e - t).abs()).fold(0.0, f64::max)
    }
}

fn require_univariate(data: &Dataset, what: &str) -> Result<()> {
    let p = data.first_prediction();
    if p.is_univariate() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "{what} needs univariate predictions, got {} of dimension {}",
            p.family(),
            p.dim()
        )))
    }
}

pub fn quantile_curve(data: &Dataset, taus: &[f64]) -> Result<QuantileCurve> {
    require_univariate(data, "the quantile curve")?;
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
        return Err(Error::Domain(format!("quantile level {t} is not in (0, 1]")));
    }
    let mut levels = data
        .pairs()
        .iter()
        .map(|(p, y)| p.cdf(y))
        .collect::<Result<Vec<f64>>>()?;
    levels.sort_by(f64::total_cmp);
    let n = levels.len() as f64;
    let empirical = taus
        .iter()
        .map(|&t| levels.partition_point(|&u| u <= t) as f64 / n)
        .collect();
    Ok(QuantileCurve {
        taus: taus.to_vec(),
        empirical,
    })
}

/// Check loss `L_tau(y, q) = (1 - tau)(q - y)_+ + tau (y - q)_+`.
pub fn pinball(tau: f64, y: f64, q: f64) -> f64 {
    (1.0 - tau) * (q - y).max(0.0) + tau * (y - q).max(0.0)
}

/// Mean pinball loss of the predicted `tau`-quantiles.
pub fn pinball_loss(data: &Dataset, tau: f64) -> Result<f64> {
    require_univariate(data, "the pinball loss")?;
    let terms = data
        .pairs()
        .iter()
        .map(|(p, y)| {
            let y = y.as_scalar().expect("univariate target");
            Ok(pinball(tau, y, p.quantile(tau)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) / data.len() as f64)
}

/// Average negative log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Nll {
    pub value: f64,
    /// Number of targets with zero predicted density.
    pub impossible_targets: usize,
}

pub fn nll(data: &Dataset) -> Result<Nll> {
    let logs = data
        .pairs()
        .iter()
        .map(|(p, y)| p.log_density(y))
        .collect::<Result<Vec<f64>>>()?;
    let impossible_targets = logs.iter().filter(|l| **l == f64::NEG_INFINITY).count();
    let value = if impossible_targets > 0 {
        f64::INFINITY
    } else {
        -pairwise_sum(&logs) / logs.len() as f64
    };
    Ok(Nll {
        value,
        impossible_targets,
    })
}

/// Mean squared Euclidean distance between targets and predictive means.
pub fn mse(data: &Dataset) -> Result<f64> {
    let terms = data
        .pairs()
        .iter()
        .map(|(p, y)| {
            let target = match y {
                Target::Reals(v) => v.clone(),
                Target::Count(c) => vec![*c as f64],
                Target::Class(_) => {
                    return Err(Error::Unsupported("MSE needs numeric targets, got a class label".into()))
                }
            };
            Ok(p.mean().iter().zip(&target).map(|(m, t)| (m - t) * (m - t)).sum())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&terms) / data.len() as f64)
}
