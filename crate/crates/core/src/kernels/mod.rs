//! Tensor-product kernels on predictions and targets.
//!
//! A [`KernelSpec`] combines a prediction kernel
//! `k_P(p, q) = exp(-lambda d(p, q)^nu)` with a target kernel `k_Y` into
//! `k((p, y), (q, z)) = k_P(p, q) k_Y(y, z)`, and fixes how expectations of
//! `k_Y` under predicted distributions are computed.

pub mod laplace;
mod monte_carlo;

use serde::{Deserialize, Serialize};

use crate::distributions::{mixture_wasserstein, wasserstein2, Family, Prediction, Target};
use crate::error::{Error, Result};
use crate::rng::{role, substream, Fingerprint};

pub use monte_carlo::{mc_double_expect_target, mc_expect_target, McEstimate};

/// Kernel on the target space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetKernel {
    /// `exp(-gamma |y - z|_2^2)`.
    GaussianRbf { gamma: f64 },
    /// `exp(-gamma |y - z|_2)`.
    LaplacianExp { gamma: f64 },
    /// `1` if `y == z`, else `0`.
    KroneckerDelta,
}

impl TargetKernel {
    pub fn gaussian(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(TargetKernel::GaussianRbf { gamma })
    }

    pub fn laplacian(gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(TargetKernel::LaplacianExp { gamma })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            TargetKernel::GaussianRbf { gamma } | TargetKernel::LaplacianExp { gamma } => {
                check_gamma(gamma)
            }
            TargetKernel::KroneckerDelta => Ok(()),
        }
    }

    pub fn eval(&self, y: &Target, z: &Target) -> Result<f64> {
        match (y, z) {
            (Target::Class(a), Target::Class(b)) => Ok(self.eval_scalar(*a as f64, *b as f64)),
            (Target::Count(a), Target::Count(b)) => Ok(self.eval_scalar(*a as f64, *b as f64)),
            (Target::Reals(a), Target::Reals(b)) if a.len() == b.len() => Ok(self.eval_slices(a, b)),
            _ => Err(Error::Dimension(format!(
                "cannot evaluate the target kernel on {y:?} and {z:?}"
            ))),
        }
    }

    #[inline]
    pub(crate) fn eval_scalar(&self, a: f64, b: f64) -> f64 {
        match *self {
            TargetKernel::GaussianRbf { gamma } => (-gamma * (a - b) * (a - b)).exp(),
            TargetKernel::LaplacianExp { gamma } => (-gamma * (a - b).abs()).exp(),
            TargetKernel::KroneckerDelta => f64::from(u8::from(a == b)),
        }
    }

    #[inline]
    pub(crate) fn eval_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            TargetKernel::GaussianRbf { gamma } => (-gamma * sq_dist(a, b)).exp(),
            TargetKernel::LaplacianExp { gamma } => (-gamma * sq_dist(a, b).sqrt()).exp(),
            TargetKernel::KroneckerDelta => f64::from(u8::from(a == b)),
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::Configuration(format!(
            "target kernel inverse length scale must be finite and positive, got {gamma}"
        )))
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Metric between predictions underlying the prediction kernel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictionMetric {
    /// 2-Wasserstein distance (normal and Laplace predictions).
    W2,
    /// Mixture Wasserstein distance of order `s` with `W2` ground metric.
    MixtureW2 { s: f64 },
    /// Euclidean distance between canonical parameter embeddings:
    /// probabilities for discrete families, `(mu, sqrt(var))` for normals,
    /// `(mu, sqrt(2) beta)` for Laplace laws.
    ParamEuclidean,
}

/// `k_P(p, q) = exp(-lambda d(p, q)^nu)` with `lambda > 0`, `0 < nu <= 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionKernel {
    pub metric: PredictionMetric,
    pub lambda: f64,
    pub nu: f64,
}

impl PredictionKernel {
    pub fn new(metric: PredictionMetric, lambda: f64, nu: f64) -> Result<Self> {
        let kernel = PredictionKernel { metric, lambda, nu };
        kernel.validate()?;
        Ok(kernel)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::Configuration(format!(
                "lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if !(self.nu > 0.0 && self.nu <= 2.0) {
            return Err(Error::Configuration(format!(
                "nu must lie in (0, 2], got {}",
                self.nu
            )));
        }
        if let PredictionMetric::MixtureW2 { s } = self.metric {
            if !(s.is_finite() && s >= 1.0) {
                return Err(Error::Configuration(format!("order s must be >= 1, got {s}")));
            }
        }
        Ok(())
    }

    pub fn distance(&self, p: &Prediction, q: &Prediction) -> Result<f64> {
        let config = |e: Error| Error::Configuration(e.to_string());
        match self.metric {
            PredictionMetric::W2 => wasserstein2(p, q).map_err(config),
            PredictionMetric::MixtureW2 { s } => mixture_wasserstein(p, q, s).map_err(config),
            PredictionMetric::ParamEuclidean => {
                let a = parameter_embedding(p)?;
                let b = parameter_embedding(q)?;
                if p.family() != q.family() || a.len() != b.len() {
                    return Err(Error::Configuration(format!(
                        "parameter embeddings of {} and {} predictions are not comparable",
                        p.family(),
                        q.family()
                    )));
                }
                Ok(sq_dist(&a, &b).sqrt())
            }
        }
    }

    pub fn eval(&self, p: &Prediction, q: &Prediction) -> Result<f64> {
        let d = self.distance(p, q)?;
        Ok((-self.lambda * d.powf(self.nu)).exp())
    }

    fn check_family(&self, p: &Prediction) -> Result<()> {
        let ok = match self.metric {
            PredictionMetric::W2 => matches!(p.family(), Family::DiagNormal | Family::Laplace),
            PredictionMetric::MixtureW2 { .. } => {
                matches!(p.base_family(), Family::DiagNormal | Family::Laplace)
            }
            PredictionMetric::ParamEuclidean => p.family() != Family::Mixture,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Configuration(format!(
                "metric {:?} is not defined for {} predictions",
                self.metric,
                p.family()
            )))
        }
    }
}

/// Canonical Euclidean parameter embedding used by
/// [`PredictionMetric::ParamEuclidean`].
pub fn parameter_embedding(p: &Prediction) -> Result<Vec<f64>> {
    match p {
        Prediction::Categorical(c) => Ok(c.probs().to_vec()),
        Prediction::DiagNormal(n) => Ok(n
            .mean()
            .iter()
            .copied()
            .chain(n.var().iter().map(|v| v.sqrt()))
            .collect()),
        Prediction::Laplace(l) => Ok(vec![l.loc(), std::f64::consts::SQRT_2 * l.scale()]),
        Prediction::TruncatedCountable(t) => Ok(t.probs().to_vec()),
        Prediction::Mixture(_) => Err(Error::Configuration(
            "mixtures have no canonical parameter embedding; use the mixture Wasserstein metric"
                .into(),
        )),
    }
}

/// How expectations of the target kernel under predictions are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExpectationMode {
    /// Closed forms; only for the supported (family, kernel) pairs.
    Analytic,
    /// Sample averages over `samples` draws. Every expectation uses its own
    /// substream derived from `seed` and the arguments, so results are
    /// deterministic functions of the inputs.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Tensor-product kernel together with its expectation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub prediction: PredictionKernel,
    pub target: TargetKernel,
    pub mode: ExpectationMode,
}

impl Default for KernelSpec {
    /// `exp(-W2(p, q)) exp(-|y - z|^2 / 2)` with analytic expectations.
    fn default() -> Self {
        KernelSpec {
            prediction: PredictionKernel {
                metric: PredictionMetric::W2,
                lambda: 1.0,
                nu: 1.0,
            },
            target: TargetKernel::GaussianRbf { gamma: 0.5 },
            mode: ExpectationMode::Analytic,
        }
    }
}

impl KernelSpec {
    pub fn new(prediction: PredictionKernel, target: TargetKernel, mode: ExpectationMode) -> Result<Self> {
        let spec = KernelSpec {
            prediction,
            target,
            mode,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.prediction.validate()?;
        self.target.validate()?;
        if let ExpectationMode::MonteCarlo { samples, .. } = self.mode {
            if samples == 0 {
                return Err(Error::Configuration("Monte Carlo mode needs at least one sample".into()));
            }
        }
        Ok(())
    }

    /// Checks that predictions like `p` can be used with this kernel.
    pub fn check_prediction(&self, p: &Prediction) -> Result<()> {
        self.prediction.check_family(p)?;
        if self.mode == ExpectationMode::Analytic && !analytic_supported(p, &self.target) {
            return Err(Error::Configuration(format!(
                "no closed-form expectation of the {:?} target kernel under {} predictions; \
                 use Monte Carlo expectations instead",
                self.target,
                describe(p)
            )));
        }
        Ok(())
    }

    /// `k((p, y), (q, z))`.
    pub fn eval(&self, p: &Prediction, y: &Target, q: &Prediction, z: &Target) -> Result<f64> {
        Ok(self.prediction.eval(p, q)? * self.target.eval(y, z)?)
    }

    /// `E_{Z ~ p} k_Y(Z, y)`.
    pub fn expect_target(&self, p: &Prediction, y: &Target) -> Result<f64> {
        match self.mode {
            ExpectationMode::Analytic => analytic_expect(&self.target, p, y),
            ExpectationMode::MonteCarlo { samples, seed } => {
                p.check_target(y)?;
                let mut fp = Fingerprint::new(seed);
                fp.push_u64(1);
                fingerprint_prediction(&mut fp, p);
                fingerprint_target(&mut fp, y);
                let mut rng = substream(seed, &[role::MONTE_CARLO, fp.finish()]);
                Ok(mc_expect_target(&self.target, p, y, samples, &mut rng)?.mean)
            }
        }
    }

    /// `E_{Z ~ p, Z' ~ q} k_Y(Z, Z')` for independent `Z`, `Z'`.
    pub fn double_expect_target(&self, p: &Prediction, q: &Prediction) -> Result<f64> {
        match self.mode {
            ExpectationMode::Analytic => analytic_double_expect(&self.target, p, q),
            ExpectationMode::MonteCarlo { samples, seed } => {
                let mut fp = Fingerprint::new(seed);
                fp.push_u64(2);
                fingerprint_prediction(&mut fp, p);
                fingerprint_prediction(&mut fp, q);
                let mut rng = substream(seed, &[role::MONTE_CARLO, fp.finish()]);
                Ok(mc_double_expect_target(&self.target, p, q, samples, &mut rng)?.mean)
            }
        }
    }

    /// The `h` function
    /// `k((p,y),(q,z)) - E_Z k((p,Z),(q,z)) - E_Z' k((p,y),(q,Z')) + E_{Z,Z'} k((p,Z),(q,Z'))`,
    /// computed for the tensor kernel as `k_P(p, q)` times the centered
    /// target-kernel term.
    pub fn eval_h(&self, p: &Prediction, y: &Target, q: &Prediction, z: &Target) -> Result<f64> {
        let kp = self.prediction.eval(p, q)?;
        let centered = match self.mode {
            ExpectationMode::Analytic => {
                self.target.eval(y, z)? - analytic_expect(&self.target, p, z)?
                    - analytic_expect(&self.target, q, y)?
                    + analytic_double_expect(&self.target, p, q)?
            }
            ExpectationMode::MonteCarlo { samples, seed } => {
                self.mc_centered(p, y, q, z, samples, seed)?.0
            }
        };
        Ok(kp * centered)
    }

    /// Monte-Carlo `h` together with its standard error. Each of the three
    /// expectations uses its own substream keyed by the full argument pair.
    pub fn eval_h_with_error(&self, p: &Prediction, y: &Target, q: &Prediction, z: &Target) -> Result<(f64, f64)> {
        let kp = self.prediction.eval(p, q)?;
        match self.mode {
            ExpectationMode::Analytic => Ok((self.eval_h(p, y, q, z)?, 0.0)),
            ExpectationMode::MonteCarlo { samples, seed } => {
                let (value, se) = self.mc_centered(p, y, q, z, samples, seed)?;
                Ok((kp * value, kp * se))
            }
        }
    }

    fn mc_centered(
        &self,
        p: &Prediction,
        y: &Target,
        q: &Prediction,
        z: &Target,
        samples: usize,
        seed: u64,
    ) -> Result<(f64, f64)> {
        let mut fp = Fingerprint::new(seed);
        fingerprint_prediction(&mut fp, p);
        fingerprint_target(&mut fp, y);
        fingerprint_prediction(&mut fp, q);
        fingerprint_target(&mut fp, z);
        let pair = fp.finish();
        let stream = |term: u64| substream(seed, &[role::MONTE_CARLO, pair, term]);
        let e1 = mc_expect_target(&self.target, p, z, samples, &mut stream(1))?;
        let e2 = mc_expect_target(&self.target, q, y, samples, &mut stream(2))?;
        let e3 = mc_double_expect_target(&self.target, p, q, samples, &mut stream(3))?;
        let value = self.target.eval(y, z)? - e1.mean - e2.mean + e3.mean;
        let se = (e1.std_error.powi(2) + e2.std_error.powi(2) + e3.std_error.powi(2)).sqrt();
        Ok((value, se))
    }
}

fn describe(p: &Prediction) -> String {
    match p {
        Prediction::Mixture(m) => format!("mixture of {}", m.component_family()),
        other => other.family().to_string(),
    }
}

/// True if the expectations of `kernel` under `p` have closed forms.
pub fn analytic_supported(p: &Prediction, kernel: &TargetKernel) -> bool {
    match p.base_family() {
        Family::Categorical | Family::TruncatedCountable => true,
        Family::DiagNormal => matches!(kernel, TargetKernel::GaussianRbf { .. }),
        Family::Laplace => matches!(kernel, TargetKernel::LaplacianExp { .. }),
        Family::Mixture => false,
    }
}

fn unsupported(kernel: &TargetKernel, p: &Prediction) -> Error {
    Error::Configuration(format!(
        "no closed-form expectation of the {kernel:?} target kernel under {} predictions; \
         use Monte Carlo expectations instead",
        describe(p)
    ))
}

fn analytic_expect(kernel: &TargetKernel, p: &Prediction, y: &Target) -> Result<f64> {
    p.check_target(y)?;
    match p {
        Prediction::Categorical(c) => {
            let Target::Class(k) = y else { unreachable!() };
            Ok(match kernel {
                TargetKernel::KroneckerDelta => c.probs()[*k],
                _ => c
                    .probs()
                    .iter()
                    .enumerate()
                    .map(|(i, pi)| pi * kernel.eval_scalar(i as f64, *k as f64))
                    .sum(),
            })
        }
        Prediction::TruncatedCountable(t) => {
            let Target::Count(k) = y else { unreachable!() };
            let probs = t.renormalized();
            Ok(match kernel {
                TargetKernel::KroneckerDelta => probs.get(*k as usize).copied().unwrap_or(0.0),
                _ => probs
                    .iter()
                    .enumerate()
                    .map(|(i, pi)| pi * kernel.eval_scalar(i as f64, *k as f64))
                    .sum(),
            })
        }
        Prediction::DiagNormal(n) => {
            let TargetKernel::GaussianRbf { gamma } = *kernel else {
                return Err(unsupported(kernel, p));
            };
            let Target::Reals(y) = y else { unreachable!() };
            let mut scale = 1.0;
            let mut exponent = 0.0;
            for ((m, v), yi) in n.mean().iter().zip(n.var()).zip(y) {
                let s = 1.0 + 2.0 * gamma * v;
                scale *= s;
                exponent += (m - yi) * (m - yi) / s;
            }
            Ok((-gamma * exponent).exp() / scale.sqrt())
        }
        Prediction::Laplace(l) => {
            let TargetKernel::LaplacianExp { gamma } = *kernel else {
                return Err(unsupported(kernel, p));
            };
            let Target::Reals(y) = y else { unreachable!() };
            Ok(laplace::expect_single(l.loc(), l.scale(), y[0], gamma))
        }
        Prediction::Mixture(m) => {
            let mut acc = 0.0;
            for (w, c) in m.weights().iter().zip(m.components()) {
                acc += w * analytic_expect(kernel, c, y)?;
            }
            Ok(acc)
        }
    }
}

fn analytic_double_expect(kernel: &TargetKernel, p: &Prediction, q: &Prediction) -> Result<f64> {
    if p.base_family() != q.base_family() || p.dim() != q.dim() {
        return Err(Error::Family(format!(
            "expectation over {} and {} predictions",
            describe(p),
            describe(q)
        )));
    }
    match (p, q) {
        (Prediction::Mixture(m), _) => {
            let mut acc = 0.0;
            for (w, c) in m.weights().iter().zip(m.components()) {
                acc += w * analytic_double_expect(kernel, c, q)?;
            }
            Ok(acc)
        }
        (_, Prediction::Mixture(m)) => {
            let mut acc = 0.0;
            for (w, c) in m.weights().iter().zip(m.components()) {
                acc += w * analytic_double_expect(kernel, p, c)?;
            }
            Ok(acc)
        }
        (Prediction::Categorical(a), Prediction::Categorical(b)) => {
            Ok(discrete_double(kernel, a.probs(), b.probs()))
        }
        (Prediction::TruncatedCountable(a), Prediction::TruncatedCountable(b)) => {
            Ok(discrete_double(kernel, &a.renormalized(), &b.renormalized()))
        }
        (Prediction::DiagNormal(a), Prediction::DiagNormal(b)) => {
            let TargetKernel::GaussianRbf { gamma } = *kernel else {
                return Err(unsupported(kernel, p));
            };
            let mut scale = 1.0;
            let mut exponent = 0.0;
            for i in 0..a.dim() {
                let s = 1.0 + 2.0 * gamma * (a.var()[i] + b.var()[i]);
                let dm = a.mean()[i] - b.mean()[i];
                scale *= s;
                exponent += dm * dm / s;
            }
            Ok((-gamma * exponent).exp() / scale.sqrt())
        }
        (Prediction::Laplace(a), Prediction::Laplace(b)) => {
            let TargetKernel::LaplacianExp { gamma } = *kernel else {
                return Err(unsupported(kernel, p));
            };
            Ok(laplace::expect_double(a.loc(), a.scale(), b.loc(), b.scale(), gamma))
        }
        _ => unreachable!("families checked above"),
    }
}

fn discrete_double(kernel: &TargetKernel, a: &[f64], b: &[f64]) -> f64 {
    match kernel {
        TargetKernel::KroneckerDelta => a.iter().zip(b).map(|(x, y)| x * y).sum(),
        _ => {
            let mut acc = 0.0;
            for (i, pa) in a.iter().enumerate() {
                for (j, pb) in b.iter().enumerate() {
                    acc += pa * pb * kernel.eval_scalar(i as f64, j as f64);
                }
            }
            acc
        }
    }
}

pub(crate) fn fingerprint_prediction(fp: &mut Fingerprint, p: &Prediction) {
    fp.push_u64(p.family() as u64);
    p.for_each_parameter(&mut |v| fp.push_f64(v));
}

pub(crate) fn fingerprint_target(fp: &mut Fingerprint, y: &Target) {
    match y {
        Target::Class(c) => {
            fp.push_u64(11);
            fp.push_u64(*c as u64);
        }
        Target::Count(c) => {
            fp.push_u64(12);
            fp.push_u64(*c);
        }
        Target::Reals(v) => {
            fp.push_u64(13);
            v.iter().for_each(|x| fp.push_f64(*x));
        }
    }
}

/// Upper bound on the absolute error of expectations under a truncated
/// countable prediction caused by ignoring its declared tail mass.
pub fn truncation_error_bound(p: &Prediction) -> f64 {
    match p {
        Prediction::TruncatedCountable(t) => 2.0 * t.tail_mass(),
        Prediction::Mixture(m) => m
            .weights()
            .iter()
            .zip(m.components())
            .map(|(w, c)| w * truncation_error_bound(c))
            .sum(),
        _ => 0.0,
    }
}
