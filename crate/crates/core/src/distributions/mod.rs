//! Predictive-distribution families.
//!
//! A [`Prediction`] is the output of a probabilistic model for one input; a
//! [`Target`] is an observed outcome. The families are the ones for which
//! the kernel expectations of the `kernels` module have closed forms, plus
//! mixtures of them.

mod transport;
mod wasserstein;

pub use transport::{solve_transport, TransportPlan};
pub use wasserstein::{mixture_wasserstein, wasserstein2};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{log_sum_exp, std_normal_cdf, std_normal_quantile, LN_SQRT_2PI};

/// Simplex vectors whose sum is off by at most this much are renormalized.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Largest number of components a mixture may have.
pub const MAX_MIXTURE_COMPONENTS: usize = 64;

/// An observed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Class(usize),
    Reals(Vec<f64>),
    Count(u64),
}

impl Target {
    pub fn real(value: f64) -> Self {
        Target::Reals(vec![value])
    }

    /// The target as a scalar, when it is one-dimensional.
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Target::Class(c) => Some(*c as f64),
            Target::Count(c) => Some(*c as f64),
            Target::Reals(v) if v.len() == 1 => Some(v[0]),
            Target::Reals(_) => None,
        }
    }

    /// The target as a point in the Euclidean target space.
    pub fn coordinates(&self) -> Vec<f64> {
        match self {
            Target::Class(c) => vec![*c as f64],
            Target::Count(c) => vec![*c as f64],
            Target::Reals(v) => v.clone(),
        }
    }

    pub fn is_finite(&self) -> bool {
        match self {
            Target::Reals(v) => v.iter().all(|x| x.is_finite()),
            _ => true,
        }
    }
}

/// Family tag of a [`Prediction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Categorical,
    DiagNormal,
    Laplace,
    Mixture,
    TruncatedCountable,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Categorical => "categorical",
            Family::DiagNormal => "diag_normal",
            Family::Laplace => "laplace",
            Family::Mixture => "mixture",
            Family::TruncatedCountable => "truncated_countable",
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn normalize_simplex(mut probs: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "{what} must have finite nonnegative entries"
        )));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::InvalidDistribution(format!(
            "{what} sums to {sum}, not 1"
        )));
    }
    rescale(&mut probs, sum);
    Ok(probs)
}

/// Divides by `total` unless it already equals 1 up to summation round-off,
/// so that normalizing twice is the same as normalizing once.
fn rescale(values: &mut [f64], total: f64) {
    if (total - 1.0).abs() > 2.0 * (values.len() + 1) as f64 * f64::EPSILON {
        values.iter_mut().for_each(|v| *v /= total);
    }
}

/// Probabilities over a finite set of classes `0..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    probs: Vec<f64>,
}

impl Categorical {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(Error::InvalidDistribution(
                "categorical distribution needs at least two classes".into(),
            ));
        }
        Ok(Categorical {
            probs: normalize_simplex(probs, "class probabilities")?,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }
}

/// Normal distribution with diagonal covariance. Zero variances describe
/// point masses along the corresponding coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagNormal {
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl DiagNormal {
    pub fn new(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidDistribution("empty mean vector".into()));
        }
        if mean.len() != var.len() {
            return Err(Error::Dimension(format!(
                "mean has dimension {} but variance has {}",
                mean.len(),
                var.len()
            )));
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite mean".into()));
        }
        if var.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidDistribution(
                "variances must be finite and nonnegative".into(),
            ));
        }
        Ok(DiagNormal { mean, var })
    }

    pub fn univariate(mean: f64, var: f64) -> Result<Self> {
        Self::new(vec![mean], vec![var])
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn var(&self) -> &[f64] {
        &self.var
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Laplace distribution with density `exp(-|y - loc| / scale) / (2 scale)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Laplace {
    loc: f64,
    scale: f64,
}

impl Laplace {
    pub fn new(loc: f64, scale: f64) -> Result<Self> {
        if !loc.is_finite() {
            return Err(Error::InvalidDistribution("non-finite location".into()));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidDistribution(
                "Laplace scale must be finite and strictly positive".into(),
            ));
        }
        Ok(Laplace { loc, scale })
    }

    pub fn loc(&self) -> f64 {
        self.loc
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

/// Finite mixture of non-mixture predictions of one family and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    weights: Vec<f64>,
    components: Vec<Prediction>,
}

impl Mixture {
    /// Zero-weight components are dropped.
    pub fn new(weights: Vec<f64>, components: Vec<Prediction>) -> Result<Self> {
        if weights.len() != components.len() {
            return Err(Error::InvalidDistribution(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let weights = normalize_simplex(weights, "mixture weights")?;
        let (weights, components): (Vec<f64>, Vec<Prediction>) = weights
            .into_iter()
            .zip(components)
            .filter(|(w, _)| *w > 0.0)
            .unzip();
        if components.is_empty() {
            return Err(Error::InvalidDistribution("mixture without components".into()));
        }
        if components.len() > MAX_MIXTURE_COMPONENTS {
            return Err(Error::InvalidDistribution(format!(
                "mixture has {} components, at most {MAX_MIXTURE_COMPONENTS} are supported",
                components.len()
            )));
        }
        let first = &components[0];
        if first.family() == Family::Mixture {
            return Err(Error::Family("mixtures of mixtures are not supported".into()));
        }
        for c in &components[1..] {
            if c.family() != first.family() {
                return Err(Error::Family(format!(
                    "mixture components of families {} and {}",
                    first.family(),
                    c.family()
                )));
            }
            if c.dim() != first.dim() {
                return Err(Error::Dimension(format!(
                    "mixture components of dimensions {} and {}",
                    first.dim(),
                    c.dim()
                )));
            }
        }
        Ok(Mixture {
            weights,
            components,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[Prediction] {
        &self.components
    }

    pub fn component_family(&self) -> Family {
        self.components[0].family()
    }
}

/// Distribution on the counts `0..=K` with an explicitly declared mass
/// beyond `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedCountable {
    probs: Vec<f64>,
    tail_mass: f64,
}

impl TruncatedCountable {
    pub fn new(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InvalidDistribution(
                "count probabilities must be finite and nonnegative".into(),
            ));
        }
        if !(tail_mass.is_finite() && tail_mass >= 0.0) {
            return Err(Error::InvalidDistribution(
                "declared tail mass must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum::<f64>() + tail_mass;
        if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "probabilities plus tail mass sum to {total}, not 1"
            )));
        }
        if probs.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidDistribution("no mass on the truncated support".into()));
        }
        let mut values = probs;
        values.push(tail_mass);
        rescale(&mut values, total);
        let tail_mass = values.pop().expect("tail entry");
        Ok(TruncatedCountable {
            probs: values,
            tail_mass,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    /// Probabilities renormalized over the truncated support.
    pub fn renormalized(&self) -> Vec<f64> {
        let mass: f64 = self.probs.iter().sum();
        self.probs.iter().map(|p| p / mass).collect()
    }
}

/// A predicted distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Categorical(Categorical),
    DiagNormal(DiagNormal),
    Laplace(Laplace),
    Mixture(Mixture),
    TruncatedCountable(TruncatedCountable),
}

/// Temperature of generalized temperature scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Temperature(f64);

impl Temperature {
    pub fn new(t: f64) -> Result<Self> {
        if t.is_finite() && t > 0.0 {
            Ok(Temperature(t))
        } else {
            Err(Error::Domain(format!("temperature must be finite and positive, got {t}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Prediction {
    pub fn categorical(probs: Vec<f64>) -> Result<Self> {
        Categorical::new(probs).map(Prediction::Categorical)
    }

    pub fn diag_normal(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        DiagNormal::new(mean, var).map(Prediction::DiagNormal)
    }

    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        DiagNormal::univariate(mean, var).map(Prediction::DiagNormal)
    }

    pub fn laplace(loc: f64, scale: f64) -> Result<Self> {
        Laplace::new(loc, scale).map(Prediction::Laplace)
    }

    pub fn mixture(weights: Vec<f64>, components: Vec<Prediction>) -> Result<Self> {
        Mixture::new(weights, components).map(Prediction::Mixture)
    }

    pub fn truncated_countable(probs: Vec<f64>, tail_mass: f64) -> Result<Self> {
        TruncatedCountable::new(probs, tail_mass).map(Prediction::TruncatedCountable)
    }

    pub fn family(&self) -> Family {
        match self {
            Prediction::Categorical(_) => Family::Categorical,
            Prediction::DiagNormal(_) => Family::DiagNormal,
            Prediction::Laplace(_) => Family::Laplace,
            Prediction::Mixture(_) => Family::Mixture,
            Prediction::TruncatedCountable(_) => Family::TruncatedCountable,
        }
    }

    /// Family of the components for mixtures, the family itself otherwise.
    pub fn base_family(&self) -> Family {
        match self {
            Prediction::Mixture(m) => m.component_family(),
            other => other.family(),
        }
    }

    /// Dimension descriptor of the target space: number of classes for
    /// categorical predictions, vector dimension for normals, 1 otherwise.
    pub fn dim(&self) -> usize {
        match self {
            Prediction::Categorical(c) => c.num_classes(),
            Prediction::DiagNormal(n) => n.dim(),
            Prediction::Laplace(_) => 1,
            Prediction::Mixture(m) => m.components[0].dim(),
            Prediction::TruncatedCountable(_) => 1,
        }
    }

    pub fn is_univariate(&self) -> bool {
        match self.base_family() {
            Family::DiagNormal => self.dim() == 1,
            Family::Laplace | Family::TruncatedCountable => true,
            _ => false,
        }
    }

    /// Checks that `y` lives in this prediction's target space.
    pub fn check_target(&self, y: &Target) -> Result<()> {
        let ok = match (self.base_family(), y) {
            (Family::Categorical, Target::Class(c)) => *c < self.dim(),
            (Family::DiagNormal, Target::Reals(v)) => v.len() == self.dim(),
            (Family::Laplace, Target::Reals(v)) => v.len() == 1,
            (Family::TruncatedCountable, Target::Count(_)) => true,
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "target {y:?} is incompatible with a {} prediction of dimension {}",
                self.family(),
                self.dim()
            )))
        }
    }

    /// True if both predictions live on the same target space.
    pub fn compatible_with(&self, other: &Prediction) -> bool {
        self.family() == other.family()
            && self.base_family() == other.base_family()
            && self.dim() == other.dim()
    }

    /// Draws a target from the prediction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Target {
        match self {
            Prediction::Categorical(c) => Target::Class(sample_index(&c.probs, rng)),
            Prediction::DiagNormal(n) => Target::Reals(
                n.mean
                    .iter()
                    .zip(&n.var)
                    .map(|(m, v)| {
                        let z: f64 = rng.sample(StandardNormal);
                        m + v.sqrt() * z
                    })
                    .collect(),
            ),
            Prediction::Laplace(l) => Target::Reals(vec![sample_laplace(l.loc, l.scale, rng)]),
            Prediction::Mixture(m) => {
                let i = sample_index(&m.weights, rng);
                m.components[i].sample(rng)
            }
            Prediction::TruncatedCountable(t) => {
                // The tail cannot be sampled; draws come from the truncated support.
                Target::Count(sample_index(&t.probs, rng) as u64)
            }
        }
    }

    /// `P(Z <= x)` for univariate predictions.
    pub fn cdf_at(&self, x: f64) -> Result<f64> {
        match self {
            Prediction::DiagNormal(n) if n.dim() == 1 => {
                let (m, v) = (n.mean[0], n.var[0]);
                Ok(if v == 0.0 {
                    if x >= m {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    std_normal_cdf((x - m) / v.sqrt())
                })
            }
            Prediction::Laplace(l) => Ok(laplace_cdf(l.loc, l.scale, x)),
            Prediction::TruncatedCountable(t) => {
                if x < 0.0 {
                    return Ok(0.0);
                }
                let upto = x.floor();
                let mass: f64 = t
                    .probs
                    .iter()
                    .enumerate()
                    .take_while(|(k, _)| (*k as f64) <= upto)
                    .map(|(_, p)| p)
                    .sum();
                Ok(mass.min(1.0))
            }
            Prediction::Mixture(m) if self.is_univariate() => {
                let mut acc = 0.0;
                for (w, c) in m.weights.iter().zip(&m.components) {
                    acc += w * c.cdf_at(x)?;
                }
                Ok(acc.clamp(0.0, 1.0))
            }
            _ => Err(Error::Dimension(format!(
                "CDF requires a univariate prediction, got {} of dimension {}",
                self.family(),
                self.dim()
            ))),
        }
    }

    /// `P(Z <= y)` for univariate predictions.
    pub fn cdf(&self, y: &Target) -> Result<f64> {
        self.check_target(y)?;
        let x = y.as_scalar().ok_or_else(|| {
            Error::Dimension("CDF requires a one-dimensional target".into())
        })?;
        self.cdf_at(x)
    }

    /// `inf { y : cdf(y) >= tau }`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::Domain(format!("quantile level {tau} is not in (0, 1)")));
        }
        match self {
            Prediction::DiagNormal(n) if n.dim() == 1 => {
                Ok(n.mean[0] + n.var[0].sqrt() * std_normal_quantile(tau))
            }
            Prediction::Laplace(l) => Ok(laplace_quantile(l.loc, l.scale, tau)),
            Prediction::TruncatedCountable(t) => {
                let mut acc = 0.0;
                for (k, p) in t.probs.iter().enumerate() {
                    acc += p;
                    if acc >= tau {
                        return Ok(k as f64);
                    }
                }
                Err(Error::Domain(format!(
                    "quantile level {tau} lies in the undeclared tail beyond the truncation"
                )))
            }
            Prediction::Mixture(m) if self.is_univariate() => mixture_quantile(self, m, tau),
            _ => Err(Error::Dimension(format!(
                "quantiles require a univariate prediction, got {} of dimension {}",
                self.family(),
                self.dim()
            ))),
        }
    }

    /// Natural logarithm of the density (continuous families) or of the
    /// probability mass (discrete families) at `y`.
    pub fn log_density(&self, y: &Target) -> Result<f64> {
        self.check_target(y)?;
        match (self, y) {
            (Prediction::Categorical(c), Target::Class(k)) => Ok(c.probs[*k].ln()),
            (Prediction::DiagNormal(n), Target::Reals(v)) => {
                let mut acc = 0.0;
                let mut on_atom = false;
                for ((m, s2), x) in n.mean.iter().zip(&n.var).zip(v) {
                    if *s2 == 0.0 {
                        if x != m {
                            return Ok(f64::NEG_INFINITY);
                        }
                        on_atom = true;
                        continue;
                    }
                    acc += -0.5 * (x - m) * (x - m) / s2 - 0.5 * s2.ln() - LN_SQRT_2PI;
                }
                // A degenerate coordinate has unbounded Lebesgue density at its atom.
                Ok(if on_atom { f64::INFINITY } else { acc })
            }
            (Prediction::Laplace(l), Target::Reals(v)) => {
                Ok(-(v[0] - l.loc).abs() / l.scale - (2.0 * l.scale).ln())
            }
            (Prediction::Mixture(m), _) => {
                let mut terms = Vec::with_capacity(m.weights.len());
                for (w, c) in m.weights.iter().zip(&m.components) {
                    terms.push(w.ln() + c.log_density(y)?);
                }
                Ok(log_sum_exp(terms))
            }
            (Prediction::TruncatedCountable(t), Target::Count(k)) => {
                match t.probs.get(*k as usize) {
                    Some(p) => Ok(p.ln()),
                    None if t.tail_mass == 0.0 => Ok(f64::NEG_INFINITY),
                    None => Err(Error::Domain(format!(
                        "count {k} lies beyond the truncation and its mass is not declared"
                    ))),
                }
            }
            _ => unreachable!("checked by check_target"),
        }
    }

    /// Mean of the prediction in the Euclidean target space.
    pub fn mean(&self) -> Vec<f64> {
        match self {
            Prediction::Categorical(c) => {
                vec![c.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()]
            }
            Prediction::DiagNormal(n) => n.mean.clone(),
            Prediction::Laplace(l) => vec![l.loc],
            Prediction::Mixture(m) => {
                let mut acc = vec![0.0; self.dim().max(1)];
                for (w, c) in m.weights.iter().zip(&m.components) {
                    for (a, v) in acc.iter_mut().zip(c.mean()) {
                        *a += w * v;
                    }
                }
                acc
            }
            Prediction::TruncatedCountable(t) => vec![t
                .renormalized()
                .iter()
                .enumerate()
                .map(|(k, p)| k as f64 * p)
                .sum()],
        }
    }

    /// Generalized temperature scaling: the new density is proportional to
    /// the old one raised to `1 / t`.
    pub fn temperature_scale(&self, t: Temperature) -> Result<Prediction> {
        let t = t.value();
        match self {
            Prediction::Categorical(c) => {
                // Work in log space so tiny probabilities do not underflow.
                let logits: Vec<f64> = c.probs.iter().map(|p| p.ln() / t).collect();
                let norm = log_sum_exp(logits.iter().copied());
                let probs: Vec<f64> = logits.iter().map(|l| (l - norm).exp()).collect();
                let sum: f64 = probs.iter().sum();
                Prediction::categorical(probs.into_iter().map(|p| p / sum).collect())
            }
            Prediction::DiagNormal(n) => Prediction::diag_normal(
                n.mean.clone(),
                n.var.iter().map(|v| v * t).collect(),
            ),
            Prediction::Laplace(l) => Prediction::laplace(l.loc, l.scale * t),
            other => Err(Error::Unsupported(format!(
                "temperature scaling has no closed form for {} predictions",
                other.family()
            ))),
        }
    }

    /// Visits every parameter in a fixed order.
    pub(crate) fn for_each_parameter(&self, f: &mut impl FnMut(f64)) {
        match self {
            Prediction::Categorical(c) => c.probs.iter().copied().for_each(f),
            Prediction::DiagNormal(n) => {
                n.mean.iter().copied().for_each(&mut *f);
                n.var.iter().copied().for_each(f);
            }
            Prediction::Laplace(l) => {
                f(l.loc);
                f(l.scale);
            }
            Prediction::Mixture(m) => {
                for (w, c) in m.weights.iter().zip(&m.components) {
                    f(*w);
                    c.for_each_parameter(f);
                }
            }
            Prediction::TruncatedCountable(t) => {
                t.probs.iter().copied().for_each(&mut *f);
                f(t.tail_mass);
            }
        }
    }

    /// True if every parameter is finite.
    pub fn is_finite(&self) -> bool {
        let mut finite = true;
        self.for_each_parameter(&mut |v| finite &= v.is_finite());
        finite
    }
}

fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let total: f64 = probs.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Round-off: return the last index with positive mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn sample_laplace<R: Rng + ?Sized>(loc: f64, scale: f64, rng: &mut R) -> f64 {
    // Uniform on (-1/2, 1/2), excluding the endpoint that maps to infinity.
    let u: f64 = rng.random::<f64>() - 0.5;
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    loc - scale * u.signum() * tail.ln()
}

fn laplace_cdf(loc: f64, scale: f64, x: f64) -> f64 {
    let z = (x - loc) / scale;
    if z < 0.0 {
        0.5 * z.exp()
    } else {
        1.0 - 0.5 * (-z).exp()
    }
}

fn laplace_quantile(loc: f64, scale: f64, tau: f64) -> f64 {
    if tau <= 0.5 {
        loc + scale * (2.0 * tau).ln()
    } else {
        loc - scale * (2.0 * (1.0 - tau)).ln()
    }
}

fn mixture_quantile(p: &Prediction, m: &Mixture, tau: f64) -> Result<f64> {
    // The mixture quantile is bracketed by the component quantiles.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in &m.components {
        let q = c.quantile(tau)?;
        lo = lo.min(q);
        hi = hi.max(q);
    }
    if p.base_family() == Family::TruncatedCountable {
        let mut k = lo.max(0.0);
        while k <= hi {
            if p.cdf_at(k)? >= tau {
                return Ok(k);
            }
            k += 1.0;
        }
        return Ok(hi);
    }
    if lo == hi {
        return Ok(lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if p.cdf_at(mid)? >= tau {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
