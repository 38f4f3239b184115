//! Expectations of the Laplacian kernel `exp(-gamma |z - z'|)` under Laplace
//! distributions.
//!
//! The closed forms have poles at `beta * gamma = 1` and `beta = beta'`. On
//! the poles (within [`BRANCH_TOLERANCE`]) the limit formulas are used. Close
//! to but off the poles the general formulas cancel catastrophically, so
//! there the same quantities are computed through their divided-difference
//! representation: with `phi(x) = exp(-c sqrt(x)) / sqrt(x)`, `c = |mu - y|`,
//! `u = 1/beta` and `v = 1/beta'`,
//!
//! ```text
//! E exp(-gamma |Z - y|)   = -gamma u^2 phi[u^2, gamma^2]
//! E exp(-gamma |Z - Z'|)  =  gamma u^2 v^2 phi[u^2, v^2, gamma^2]
//! ```
//!
//! where `phi[..]` are divided differences, evaluated by Gauss-Legendre
//! quadrature of the Hermite-Genocchi integral when the nodes cluster.

/// Relative tolerance on `|beta gamma - 1|` and `|beta - beta'|` for the
/// limit branches.
pub const BRANCH_TOLERANCE: f64 = 1e-8;

/// Below this relative separation of the poles the divided-difference
/// evaluation replaces the general closed form.
const STABLE_GAP: f64 = 1e-3;

/// Branches of the double expectation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoubleBranch {
    /// `beta != beta'`, neither equal to `1/gamma`.
    Distinct,
    /// `beta = beta' = 1/gamma`.
    BothResonant,
    /// `beta = beta' != 1/gamma`.
    EqualScales,
    /// `beta != beta'`, `beta = 1/gamma`.
    FirstResonant,
    /// `beta != beta'`, `beta' = 1/gamma`.
    SecondResonant,
}

fn resonant(beta: f64, gamma: f64) -> bool {
    (beta * gamma - 1.0).abs() <= BRANCH_TOLERANCE
}

fn equal_scales(b1: f64, b2: f64) -> bool {
    (b1 - b2).abs() <= BRANCH_TOLERANCE * b1.max(b2)
}

pub fn double_branch(b1: f64, b2: f64, gamma: f64) -> DoubleBranch {
    match (resonant(b1, gamma), resonant(b2, gamma), equal_scales(b1, b2)) {
        (true, true, _) => DoubleBranch::BothResonant,
        (false, false, true) => DoubleBranch::EqualScales,
        (true, false, _) => DoubleBranch::FirstResonant,
        (false, true, _) => DoubleBranch::SecondResonant,
        (false, false, false) => DoubleBranch::Distinct,
    }
}

/// `E_{Z ~ L(mu, beta)} exp(-gamma |Z - y|)`.
pub fn expect_single(mu: f64, beta: f64, y: f64, gamma: f64) -> f64 {
    let c = (mu - y).abs();
    if resonant(beta, gamma) {
        return 0.5 * (1.0 + gamma * c) * (-gamma * c).exp();
    }
    let bg = beta * gamma;
    if (bg - 1.0).abs() >= STABLE_GAP {
        (bg * (-c / beta).exp() - (-gamma * c).exp()) / (bg * bg - 1.0)
    } else {
        let u = 1.0 / beta;
        -gamma * u * u * divided_difference1(c, u * u, gamma * gamma)
    }
}

/// `E_{Z ~ L(mu1, b1), Z' ~ L(mu2, b2)} exp(-gamma |Z - Z'|)`.
pub fn expect_double(mu1: f64, b1: f64, mu2: f64, b2: f64, gamma: f64) -> f64 {
    let c = (mu1 - mu2).abs();
    let branch = double_branch(b1, b2, gamma);
    if branch == DoubleBranch::Distinct && !well_separated(b1, b2, gamma) {
        let (u, v) = (1.0 / b1, 1.0 / b2);
        return gamma * u * u * v * v * divided_difference2(c, u * u, v * v, gamma * gamma);
    }
    closed_form_double(branch, c, b1, b2, gamma)
}

fn well_separated(b1: f64, b2: f64, gamma: f64) -> bool {
    (b1 * gamma - 1.0).abs() >= STABLE_GAP
        && (b2 * gamma - 1.0).abs() >= STABLE_GAP
        && (b1 - b2).abs() >= STABLE_GAP * b1.max(b2)
}

/// The closed forms of the five branches, `c = |mu - mu'|`.
pub fn closed_form_double(branch: DoubleBranch, c: f64, b1: f64, b2: f64, gamma: f64) -> f64 {
    let e_gamma = (-gamma * c).exp();
    match branch {
        DoubleBranch::Distinct => {
            let d1 = b1 * b1 * gamma * gamma - 1.0;
            let d2 = b2 * b2 * gamma * gamma - 1.0;
            gamma * b1.powi(3) / (d1 * (b1 * b1 - b2 * b2)) * (-c / b1).exp()
                + gamma * b2.powi(3) / (d2 * (b2 * b2 - b1 * b1)) * (-c / b2).exp()
                + e_gamma / (d1 * d2)
        }
        DoubleBranch::BothResonant => {
            let gc = gamma * c;
            (3.0 + 3.0 * gc + gc * gc) / 8.0 * e_gamma
        }
        DoubleBranch::EqualScales => {
            let b = 0.5 * (b1 + b2);
            let d = b * b * gamma * gamma - 1.0;
            e_gamma / (d * d)
                + (gamma * (b + c) / (2.0 * d) - b * gamma / (d * d)) * (-c / b).exp()
        }
        DoubleBranch::FirstResonant => resonant_other(c, b2, gamma),
        DoubleBranch::SecondResonant => resonant_other(c, b1, gamma),
    }
}

/// One scale equals `1/gamma`, the other is `b`.
fn resonant_other(c: f64, b: f64, gamma: f64) -> f64 {
    let bg2 = b * b * gamma * gamma;
    let d = bg2 - 1.0;
    (b * gamma).powi(3) / (d * d) * (-c / b).exp()
        - ((1.0 + gamma * c) / (2.0 * d) + bg2 / (d * d)) * (-gamma * c).exp()
}

// phi(x) = exp(-c r) / r with r = sqrt(x), and its first two derivatives.
fn phi(c: f64, x: f64) -> f64 {
    let r = x.sqrt();
    (-c * r).exp() / r
}

fn phi1(c: f64, x: f64) -> f64 {
    let r = x.sqrt();
    -(-c * r).exp() * (c * r + 1.0) / (2.0 * r * r * r)
}

fn phi2(c: f64, x: f64) -> f64 {
    let r = x.sqrt();
    let cr = c * r;
    (-cr).exp() * (cr * cr + 3.0 * cr + 3.0) / (4.0 * r.powi(5))
}

// 8-point Gauss-Legendre rule on [0, 1].
const GL_NODES: [f64; 8] = [
    0.019_855_071_751_231_856,
    0.101_666_761_293_186_63,
    0.237_233_795_041_835_5,
    0.408_282_678_752_175_1,
    0.591_717_321_247_824_9,
    0.762_766_204_958_164_5,
    0.898_333_238_706_813_4,
    0.980_144_928_248_768_2,
];
const GL_WEIGHTS: [f64; 8] = [
    0.050_614_268_145_188_13,
    0.111_190_517_226_687_24,
    0.156_853_322_938_943_64,
    0.181_341_891_689_180_99,
    0.181_341_891_689_180_99,
    0.156_853_322_938_943_64,
    0.111_190_517_226_687_24,
    0.050_614_268_145_188_13,
];

fn divided_difference1(c: f64, x0: f64, x1: f64) -> f64 {
    let gap = x1 - x0;
    if gap.abs() > STABLE_GAP * x0.max(x1) {
        return (phi(c, x1) - phi(c, x0)) / gap;
    }
    GL_NODES
        .iter()
        .zip(GL_WEIGHTS)
        .map(|(t, w)| w * phi1(c, x0 + t * gap))
        .sum()
}

fn divided_difference2(c: f64, x0: f64, x1: f64, x2: f64) -> f64 {
    let mut xs = [x0, x1, x2];
    xs.sort_by(f64::total_cmp);
    let [a, b, d] = xs;
    if d - a > STABLE_GAP * d {
        return (divided_difference1(c, b, d) - divided_difference1(c, a, b)) / (d - a);
    }
    // Hermite-Genocchi: integral of phi'' over the standard 2-simplex,
    // collapsed onto the unit square.
    let mut acc = 0.0;
    for (s, ws) in GL_NODES.iter().zip(GL_WEIGHTS) {
        for (t, wt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let t1 = *s;
            let t2 = (1.0 - s) * t;
            acc += ws * wt * (1.0 - s) * phi2(c, a + t1 * (b - a) + t2 * (d - a));
        }
    }
    acc
}
