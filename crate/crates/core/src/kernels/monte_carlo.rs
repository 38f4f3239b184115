use rand::Rng;

use super::TargetKernel;
use crate::distributions::{Prediction, Target};
use crate::error::{Error, Result};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

fn summarize(sum: f64, sum_sq: f64, samples: usize) -> McEstimate {
    let n = samples as f64;
    let mean = sum / n;
    let var = if samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    McEstimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// Monte-Carlo estimate of `E_{Z ~ p} k_Y(Z, y)`.
pub fn mc_expect_target<R: Rng + ?Sized>(
    kernel: &TargetKernel,
    p: &Prediction,
    y: &Target,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Configuration("Monte Carlo mode needs at least one sample".into()));
    }
    p.check_target(y)?;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let k = kernel.eval(&p.sample(rng), y)?;
        sum += k;
        sum_sq += k * k;
    }
    Ok(summarize(sum, sum_sq, samples))
}

/// Monte-Carlo estimate of `E_{Z ~ p, Z' ~ q} k_Y(Z, Z')` from independent pairs.
pub fn mc_double_expect_target<R: Rng + ?Sized>(
    kernel: &TargetKernel,
    p: &Prediction,
    q: &Prediction,
    samples: usize,
    rng: &mut R,
) -> Result<McEstimate> {
    if samples == 0 {
        return Err(Error::Configuration("Monte Carlo mode needs at least one sample".into()));
    }
    if !p.compatible_with(q) && !(p.base_family() == q.base_family() && p.dim() == q.dim()) {
        return Err(Error::Family(format!(
            "expectation over {} and {} predictions",
            p.family(),
            q.family()
        )));
    }
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let z = p.sample(rng);
        let w = q.sample(rng);
        let k = kernel.eval(&z, &w)?;
        sum += k;
        sum_sq += k * k;
    }
    Ok(summarize(sum, sum_sq, samples))
}
