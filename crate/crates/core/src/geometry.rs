//! Atomic norm, dual norm and normal-cone distances for a union of subspaces.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{replicate, split_latent, PenalizedProblem, SolverConfig};
use crate::subspace::{GroupStructure, SubspaceModel, RANK_TOL};

/// Tolerance of the γ bisection in [`dist_to_normal_cone`].
pub const GAMMA_TOL: f64 = 1e-10;

const NORM_GRID_POINTS: usize = 40;
const NORM_GRID_FLOOR: f64 = 1e-11;

/// A minimizing decomposition `x = Σ K_i α_i (+ K_free β)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomicDecomposition {
    pub coefficients: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free: Option<Vec<f64>>,
    /// `Σ ‖α_i‖` of the returned (exactly feasible) decomposition.
    pub value: f64,
    /// A dual lower bound on the norm; `value − lower_bound` bounds the gap.
    pub lower_bound: f64,
}

impl AtomicDecomposition {
    pub fn reconstruct(&self, model: &SubspaceModel) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = self
            .coefficients
            .iter()
            .map(|c| DVector::from_column_slice(c))
            .collect();
        let free = self.free.as_ref().map(|f| DVector::from_column_slice(f));
        model.synthesize(&parts, free.as_ref())
    }
}

/// `‖x‖_A = min Σ ‖α_i‖ s.t. x = Σ K_i α_i`.
///
/// Solved on the replicated latent problem with the identity as design,
/// following λ down to `1e-11·λ_max`. The leftover residual is absorbed by a
/// pseudo-inverse correction so the decomposition is exactly feasible, and
/// the scaled residual serves as a dual certificate for the lower bound.
pub fn atomic_norm(x: &DVector<f64>, model: &SubspaceModel) -> Result<AtomicDecomposition> {
    if x.len() != model.p() {
        return Err(Error::Dimension(format!(
            "vector has length {}, model p = {}",
            x.len(),
            model.p()
        )));
    }
    let (k, groups) = replicate(&DMatrix::identity(model.p(), model.p()), model)?;
    let prob = PenalizedProblem::new(x, &k, &groups)?;
    let lambda_max = prob.lambda_max();
    let mut z = DVector::zeros(k.ncols());
    if lambda_max > 0.0 {
        let cfg = SolverConfig {
            grid_points: NORM_GRID_POINTS,
            grid_floor: NORM_GRID_FLOOR,
            max_iters: 20_000,
            tol: 1e-14,
            certificate_tol: 1e-10,
            ..SolverConfig::default()
        };
        for lambda in cfg.grid(lambda_max) {
            z = prob.solve(lambda, Some(&z), &cfg)?.latent;
        }
    } else {
        // only the free part can be nonzero
        z = prob.solve(1.0, None, &SolverConfig::default())?.latent;
    }

    let residual = x - &k * &z;
    let lower_bound = dual_lower_bound(x, model, &residual);
    if residual.norm() > 0.0 {
        let svd = k.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let corr = svd
            .solve(&residual, RANK_TOL * smax)
            .map_err(|e| Error::Domain(e.to_string()))?;
        z += corr;
    }
    let (parts, free) = split_latent(&z, model);
    let value = parts.iter().map(|v| v.norm()).sum();
    Ok(AtomicDecomposition {
        coefficients: parts.iter().map(|v| v.as_slice().to_vec()).collect(),
        free: free.map(|v| v.as_slice().to_vec()),
        value,
        lower_bound: lower_bound.min(value),
    })
}

/// `⟨x, ν⟩ / ‖ν‖*` for `ν` the residual with its free component removed.
fn dual_lower_bound(x: &DVector<f64>, model: &SubspaceModel, residual: &DVector<f64>) -> f64 {
    let mut nu = residual.clone();
    if let Some(f) = model.free() {
        let c = f.project(&nu);
        let mut back = DVector::zeros(model.p());
        f.add_embedded(c.as_slice(), &mut back);
        nu -= back;
    }
    let d = dual_norm(&nu, model);
    if d > 0.0 {
        (x.dot(&nu) / d).max(0.0)
    } else {
        0.0
    }
}

/// `‖z‖*_A = max_i ‖K_iᵀ z‖` over the penalized subspaces.
pub fn dual_norm(z: &DVector<f64>, model: &SubspaceModel) -> f64 {
    model
        .subspaces()
        .iter()
        .map(|s| s.project(z).norm())
        .fold(0.0, f64::max)
}

/// `Σ_G ‖x_G‖` for a disjoint group structure.
pub fn disjoint_group_norm(x: &DVector<f64>, g: &GroupStructure) -> Result<f64> {
    if !g.is_disjoint() {
        return Err(Error::UnsupportedStructure);
    }
    if x.len() != g.p {
        return Err(Error::Dimension("vector length != p".into()));
    }
    Ok(g.groups
        .iter()
        .map(|grp| grp.iter().map(|&i| x[i] * x[i]).sum::<f64>().sqrt())
        .sum())
}

/// A point of the normal cone `N_A(x*)` at scale γ.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormalConePoint {
    pub gamma: f64,
    pub vector: Vec<f64>,
}

/// Euclidean distance from `w` to the normal cone of the group norm at `x*`.
///
/// For disjoint groups the cone is `{z : z_G = γ x*_G/‖x*_G‖ on active
/// groups, ‖z_G‖ ≤ γ elsewhere, γ ≥ 0}` (zero on unpenalized coordinates), so
/// only the scalar γ has to be optimized.
pub fn dist_to_normal_cone(
    w: &DVector<f64>,
    x_star: &DVector<f64>,
    g: &GroupStructure,
) -> Result<(f64, NormalConePoint)> {
    if !g.is_disjoint() {
        return Err(Error::UnsupportedStructure);
    }
    if w.len() != g.p || x_star.len() != g.p {
        return Err(Error::Dimension("vector length != p".into()));
    }
    let norm_of = |v: &DVector<f64>, grp: &[usize]| grp.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();

    // active groups carry (projection of w on u_G), inactive ones ‖w_G‖
    let mut proj = Vec::new();
    let mut inactive = Vec::new();
    for grp in &g.groups {
        let xn = norm_of(x_star, grp);
        if xn > 0.0 {
            proj.push(grp.iter().map(|&i| w[i] * x_star[i]).sum::<f64>() / xn);
        } else {
            inactive.push(norm_of(w, grp));
        }
    }
    let slope = |gamma: f64| -> f64 {
        proj.iter().map(|&c| gamma - c).sum::<f64>()
            - inactive.iter().map(|&n| (n - gamma).max(0.0)).sum::<f64>()
    };
    let max_inactive = inactive.iter().copied().fold(0.0, f64::max);
    let max_proj = proj.iter().copied().fold(0.0, f64::max);
    let gamma = if proj.is_empty() {
        max_inactive
    } else if slope(0.0) >= 0.0 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, max_inactive.max(max_proj) + 1.0);
        while hi - lo > GAMMA_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if slope(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };

    let mut z = DVector::zeros(g.p);
    for grp in &g.groups {
        let xn = norm_of(x_star, grp);
        if xn > 0.0 {
            for &i in grp {
                z[i] = gamma * x_star[i] / xn;
            }
        } else {
            let wn = norm_of(w, grp);
            let scale = if wn > gamma { gamma / wn } else { 1.0 };
            for &i in grp {
                z[i] = w[i] * scale;
            }
        }
    }
    let dist = (w - &z).norm();
    Ok((
        dist,
        NormalConePoint {
            gamma,
            vector: z.as_slice().to_vec(),
        },
    ))
}

/// A uniform unit atom of subspace `i`: `K_i a` with `a` uniform on the sphere.
pub fn sample_atom<R: Rng + ?Sized>(model: &SubspaceModel, i: usize, rng: &mut R) -> DVector<f64> {
    let s = model.subspace(i);
    let mut a: Vec<f64> = (0..s.dim()).map(|_| rng.sample(StandardNormal)).collect();
    let n = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    a.iter_mut().for_each(|v| *v /= n);
    let mut out = DVector::zeros(model.p());
    s.add_embedded(&a, &mut out);
    out
}

/// An atom from a uniformly chosen subspace.
pub fn sample_any_atom<R: Rng + ?Sized>(model: &SubspaceModel, rng: &mut R) -> DVector<f64> {
    let i = rng.random_range(0..model.m());
    sample_atom(model, i, rng)
}
