use super::{solve_transport, Family, Prediction};
use crate::error::{Error, Result};

/// 2-Wasserstein distance with respect to the Euclidean ground metric.
///
/// Closed forms exist for normals with commuting (here: diagonal) covariances,
/// `W2^2 = |mu - mu'|^2 + |sqrt(S) - sqrt(S')|_F^2`, and for Laplace laws,
/// `W2^2 = (mu - mu')^2 + 2 (beta - beta')^2`.
pub fn wasserstein2(p: &Prediction, q: &Prediction) -> Result<f64> {
    match (p, q) {
        (Prediction::DiagNormal(a), Prediction::DiagNormal(b)) => {
            if a.dim() != b.dim() {
                return Err(Error::Family(format!(
                    "normals of dimensions {} and {}",
                    a.dim(),
                    b.dim()
                )));
            }
            let mut sq = 0.0;
            for i in 0..a.dim() {
                let dm = a.mean()[i] - b.mean()[i];
                let ds = a.var()[i].sqrt() - b.var()[i].sqrt();
                sq += dm * dm + ds * ds;
            }
            Ok(sq.sqrt())
        }
        (Prediction::Laplace(a), Prediction::Laplace(b)) => {
            let dm = a.loc() - b.loc();
            let ds = a.scale() - b.scale();
            Ok((dm * dm + 2.0 * ds * ds).sqrt())
        }
        _ if p.family() != q.family() => Err(Error::Family(format!(
            "no Wasserstein distance between {} and {} predictions",
            p.family(),
            q.family()
        ))),
        _ => Err(Error::Family(format!(
            "no closed-form Wasserstein distance for {} predictions",
            p.family()
        ))),
    }
}

fn as_components(p: &Prediction) -> (Vec<f64>, Vec<&Prediction>) {
    match p {
        Prediction::Mixture(m) => (m.weights().to_vec(), m.components().iter().collect()),
        other => (vec![1.0], vec![other]),
    }
}

/// Mixture Wasserstein distance of order `s`: the `s`-th root of the optimal
/// transport cost between the weight vectors, with ground cost
/// `wasserstein2(p_i, q_j)^s` between components.
///
/// Non-mixture predictions are treated as single-component mixtures.
pub fn mixture_wasserstein(p: &Prediction, q: &Prediction, s: f64) -> Result<f64> {
    if !(s.is_finite() && s >= 1.0) {
        return Err(Error::Domain(format!("order s must lie in [1, inf), got {s}")));
    }
    if p.base_family() != q.base_family() {
        return Err(Error::Family(format!(
            "mixture components of families {} and {}",
            p.base_family(),
            q.base_family()
        )));
    }
    if !matches!(p.base_family(), Family::DiagNormal | Family::Laplace) {
        return Err(Error::Family(format!(
            "no Wasserstein ground metric between {} components",
            p.base_family()
        )));
    }
    let (wp, cp) = as_components(p);
    let (wq, cq) = as_components(q);
    let mut cost = vec![vec![0.0; cq.len()]; cp.len()];
    for (i, a) in cp.iter().enumerate() {
        for (j, b) in cq.iter().enumerate() {
            cost[i][j] = wasserstein2(a, b)?.powf(s);
        }
    }
    let plan = solve_transport(&wp, &wq, &cost)?;
    Ok(plan.cost.max(0.0).powf(1.0 / s))
}
