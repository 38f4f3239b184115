//! Scalar special functions and reductions shared by the other modules.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI).exp()
}

/// Standard normal quantile, polished with Newton steps on [`std_normal_cdf`]
/// so that the CDF round trip is accurate to a few ulps.
pub fn std_normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let std = Normal::standard();
    let mut x = std.inverse_cdf(p);
    for _ in 0..3 {
        let pdf = std_normal_pdf(x);
        if !(pdf > 0.0) || !x.is_finite() {
            break;
        }
        let step = (std_normal_cdf(x) - p) / pdf;
        x -= step;
        if step.abs() <= 1e-16 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// Upper tail probability of the chi-squared distribution with `dof` degrees of freedom.
pub fn chi_squared_sf(x: f64, dof: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    chi.sf(x).clamp(0.0, 1.0)
}

/// Pairwise (tree) summation. Used for long reductions so the rounding error
/// grows logarithmically with the length and the result does not depend on
/// how the terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 64;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

pub fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.into_iter().collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sample mean and unbiased sample variance.
pub fn mean_and_variance(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let ss: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (mean, pairwise_sum(&ss) / (n - 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Maclaurin series of the error function, summed until the terms vanish.
    fn erf_series(x: f64) -> f64 {
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-18 {
                break;
            }
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn normal_cdf_matches_series() {
        for &x in &[-2.0, -1.0, -0.3, 0.0, 0.5, 1.0, 2.0] {
            let series = 0.5 * (1.0 + erf_series(x / SQRT_2));
            assert!((std_normal_cdf(x) - series).abs() < 1e-14, "x = {x}: {} vs {series}", std_normal_cdf(x));
        }
        assert!((std_normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((std_normal_cdf(-3.0) / 0.001_349_898_031_630_094_6 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_round_trip() {
        for i in 1..1000 {
            let p = i as f64 / 1000.0;
            let x = std_normal_quantile(p);
            assert!((std_normal_cdf(x) - p).abs() < 1e-14, "p = {p}");
        }
    }

    #[test]
    fn chi_squared_tail() {
        assert_eq!(chi_squared_sf(0.0, 3), 1.0);
        // chi2 with 2 dof is exponential with mean 2.
        assert!((chi_squared_sf(3.0, 2) - (-1.5f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn pairwise_sum_matches_naive_on_small_inputs() {
        let v: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 499_500.0);
    }

    #[test]
    fn log_sum_exp_handles_infinities() {
        assert_eq!(log_sum_exp([f64::NEG_INFINITY, f64::NEG_INFINITY]), f64::NEG_INFINITY);
        assert!((log_sum_exp([0.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
    }
}
