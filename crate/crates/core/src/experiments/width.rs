//! Monte-Carlo estimates of the squared distance to the normal cone.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::dist_to_normal_cone;
use crate::subspace::GroupStructure;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub trials: usize,
    /// Mean of `dist(w, N(x*))²` over standard normal `w`.
    pub mean_dist_sq: f64,
    pub stderr: f64,
    /// Mean of `‖r(w) − w‖²` for the cone point built from `t(w) = max_{G∉J} ‖w_G‖`.
    pub construction_mean: f64,
    pub construction_stderr: f64,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub(crate) fn summarize(v: &[f64]) -> (f64, f64) {
    mean_stderr(v)
}

/// `‖r − w‖²` where `r_G = t·x*_G/‖x*_G‖` on active groups and `r_G = w_G`
/// elsewhere, `t` being the largest inactive block norm of `w`.
pub fn construction_dist_sq(w: &DVector<f64>, x_star: &DVector<f64>, g: &GroupStructure) -> f64 {
    let norm_of = |v: &DVector<f64>, grp: &[usize]| grp.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
    let t = g
        .groups
        .iter()
        .filter(|grp| norm_of(x_star, grp) == 0.0)
        .map(|grp| norm_of(w, grp))
        .fold(0.0, f64::max);
    let free: f64 = g.unpenalized.iter().map(|&i| w[i] * w[i]).sum();
    free + g
        .groups
        .iter()
        .filter_map(|grp| {
            let xn = norm_of(x_star, grp);
            (xn > 0.0).then(|| grp.iter().map(|&i| (w[i] - t * x_star[i] / xn).powi(2)).sum::<f64>())
        })
        .sum::<f64>()
}

/// Estimates the width bound `E dist(w, N(x*))²` for disjoint groups along
/// with the proof-construction surrogate, from `trials` seeded draws.
pub fn estimate_width_ub(
    x_star: &DVector<f64>,
    g: &GroupStructure,
    trials: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    if !g.is_disjoint() {
        return Err(Error::UnsupportedStructure);
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut exact = Vec::with_capacity(trials);
    let mut cons = Vec::with_capacity(trials);
    for _ in 0..trials {
        let w = DVector::from_fn(g.p, |_, _| StandardNormal.sample(&mut rng));
        let (d, _) = dist_to_normal_cone(&w, x_star, g)?;
        exact.push(d * d);
        cons.push(construction_dist_sq(&w, x_star, g));
    }
    let (mean_dist_sq, stderr) = mean_stderr(&exact);
    let (construction_mean, construction_stderr) = mean_stderr(&cons);
    Ok(WidthEstimate {
        trials,
        mean_dist_sq,
        stderr,
        construction_mean,
        construction_stderr,
    })
}
