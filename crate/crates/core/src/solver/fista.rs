//! Accelerated proximal gradient for `½‖y − Az‖² + λ Σ_G ‖z_G‖`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::config::SolverConfig;
use super::latent::LatentGroups;
use crate::error::{Error, Result};

/// Outcome of one penalized solve.
#[derive(Debug, Clone)]
pub struct PenalizedSolution {
    pub latent: DVector<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
    /// Relative movement of one extra prox-gradient step from `latent`.
    pub certificate: f64,
    /// Objective of every accepted iterate, starting with the initial point.
    pub trace: Vec<f64>,
}

/// `out = A z`, skipping zero entries of `z`.
pub(crate) fn mul_into(a: &DMatrix<f64>, z: &DVector<f64>, out: &mut DVector<f64>) {
    let n = a.nrows();
    let data = a.as_slice();
    let o = out.as_mut_slice();
    o.fill(0.0);
    for (j, &zj) in z.iter().enumerate() {
        if zj != 0.0 {
            let col = &data[j * n..(j + 1) * n];
            for (oi, ci) in o.iter_mut().zip(col) {
                *oi += zj * ci;
            }
        }
    }
}

/// `out = Aᵀ r` with a fixed four-way reduction order.
pub(crate) fn tr_mul_into(a: &DMatrix<f64>, r: &DVector<f64>, out: &mut DVector<f64>) {
    let n = a.nrows();
    let data = a.as_slice();
    let r = r.as_slice();
    for (j, oj) in out.iter_mut().enumerate() {
        *oj = dot(&data[j * n..(j + 1) * n], r);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut tail = 0.0;
    for i in 4 * chunks..a.len() {
        tail += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `σ_max(A)²`, from the smaller Gram matrix.
pub fn lipschitz(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let gram = if a.nrows() <= a.ncols() {
        a * a.transpose()
    } else {
        a.tr_mul(a)
    };
    SymmetricEigen::new(gram)
        .eigenvalues
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

/// A fixed least-squares + group-penalty problem with a precomputed step.
pub struct PenalizedProblem<'a> {
    y: &'a DVector<f64>,
    design: &'a DMatrix<f64>,
    groups: &'a LatentGroups,
    lipschitz: f64,
}

impl<'a> PenalizedProblem<'a> {
    pub fn new(y: &'a DVector<f64>, design: &'a DMatrix<f64>, groups: &'a LatentGroups) -> Result<Self> {
        Self::with_lipschitz(y, design, groups, lipschitz(design))
    }

    pub fn with_lipschitz(
        y: &'a DVector<f64>,
        design: &'a DMatrix<f64>,
        groups: &'a LatentGroups,
        lipschitz: f64,
    ) -> Result<Self> {
        if y.len() != design.nrows() {
            return Err(Error::Dimension("y length != design rows".into()));
        }
        if groups.dim() != design.ncols() {
            return Err(Error::Dimension("latent groups do not match design columns".into()));
        }
        Ok(PenalizedProblem {
            y,
            design,
            groups,
            lipschitz: lipschitz.max(f64::MIN_POSITIVE),
        })
    }

    pub fn y(&self) -> &DVector<f64> {
        self.y
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn objective(&self, z: &DVector<f64>, lambda: f64) -> f64 {
        let mut az = DVector::zeros(self.y.len());
        mul_into(self.design, z, &mut az);
        self.objective_from(&az, z, lambda)
    }

    fn objective_from(&self, az: &DVector<f64>, z: &DVector<f64>, lambda: f64) -> f64 {
        let fit: f64 = az
            .iter()
            .zip(self.y.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        0.5 * fit + lambda * self.groups.penalty(z)
    }

    /// One plain prox-gradient step from `z` (given `az = A z`).
    pub fn prox_step(&self, z: &DVector<f64>, az: &DVector<f64>, lambda: f64) -> DVector<f64> {
        let mut grad = DVector::zeros(z.len());
        tr_mul_into(self.design, &(az - self.y), &mut grad);
        let mut next = z - grad / self.lipschitz;
        self.groups.shrink_in_place(&mut next, lambda / self.lipschitz);
        next
    }

    /// Relative fixed-point residual `‖T(z) − z‖ / ‖z‖` of the prox-gradient map.
    pub fn certificate(&self, z: &DVector<f64>, lambda: f64) -> f64 {
        let mut az = DVector::zeros(self.y.len());
        mul_into(self.design, z, &mut az);
        relative_move(&self.prox_step(z, &az, lambda), z)
    }

    /// Smallest λ for which the penalized blocks of the solution vanish.
    pub fn lambda_max(&self) -> f64 {
        let resid = self.free_residual();
        let mut g = DVector::zeros(self.design.ncols());
        tr_mul_into(self.design, &resid, &mut g);
        self.groups.dual(&g)
    }

    /// `y` minus its least-squares fit on the free columns.
    fn free_residual(&self) -> DVector<f64> {
        let free = self.groups.free();
        if free.is_empty() {
            return self.y.clone();
        }
        let cols: Vec<_> = free.iter().map(|&j| self.design.column(j)).collect();
        let f = DMatrix::from_columns(&cols);
        match f.clone().svd(true, true).solve(self.y, 1e-12) {
            Ok(c) => self.y - f * c,
            Err(_) => self.y.clone(),
        }
    }

    /// Runs accelerated proximal gradient from `warm` (zero when absent).
    ///
    /// Momentum is reset whenever a step would increase the objective, and the
    /// rejected step is replaced by a plain prox-gradient step, so the accepted
    /// objective sequence is non-increasing.
    pub fn solve(&self, lambda: f64, warm: Option<&DVector<f64>>, cfg: &SolverConfig) -> Result<PenalizedSolution> {
        if !(lambda > 0.0) {
            return Err(Error::Domain(format!("lambda must be positive, got {lambda}")));
        }
        let d = self.design.ncols();
        let n = self.y.len();
        let step = 1.0 / self.lipschitz;
        let thresh = lambda * step;

        let mut z = match warm {
            Some(w) if w.len() == d => w.clone(),
            Some(_) => return Err(Error::Dimension("warm start length".into())),
            None => DVector::zeros(d),
        };
        let mut az = DVector::zeros(n);
        mul_into(self.design, &z, &mut az);
        let mut f = self.objective_from(&az, &z, lambda);
        if !f.is_finite() {
            return Err(Error::Divergence { iteration: 0 });
        }
        let mut z_prev = z.clone();
        let mut az_prev = az.clone();
        let mut u = DVector::zeros(d);
        let mut au = DVector::zeros(n);
        let mut grad = DVector::zeros(d);
        let mut cand = DVector::zeros(d);
        let mut a_cand = DVector::zeros(n);

        let mut t = 1.0f64;
        let mut trace = vec![f];
        let mut iterations = 0;
        let mut restarts = 0;
        let mut converged = false;
        let mut certificate = f64::INFINITY;
        let mut next_check = 0;

        while iterations < cfg.max_iters {
            iterations += 1;
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            let beta = (t - 1.0) / t_next;
            for i in 0..d {
                u[i] = z[i] + beta * (z[i] - z_prev[i]);
            }
            for i in 0..n {
                au[i] = az[i] + beta * (az[i] - az_prev[i]) - self.y[i];
            }
            tr_mul_into(self.design, &au, &mut grad);
            for i in 0..d {
                cand[i] = u[i] - step * grad[i];
            }
            self.groups.shrink_in_place(&mut cand, thresh);
            mul_into(self.design, &cand, &mut a_cand);
            let f_cand = self.objective_from(&a_cand, &cand, lambda);
            if !f_cand.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }

            if f_cand > f {
                if beta == 0.0 {
                    // a plain step no longer decreases: rounding floor
                    certificate = self.certificate(&z, lambda);
                    converged = certificate <= cfg.certificate_tol;
                    break;
                }
                restarts += 1;
                t = 1.0;
                z_prev.copy_from(&z);
                az_prev.copy_from(&az);
                continue;
            }

            std::mem::swap(&mut z_prev, &mut z);
            std::mem::swap(&mut z, &mut cand);
            std::mem::swap(&mut az_prev, &mut az);
            std::mem::swap(&mut az, &mut a_cand);
            let rel = (f - f_cand) / f_cand.abs().max(f64::MIN_POSITIVE);
            f = f_cand;
            t = t_next;
            trace.push(f);

            if rel <= cfg.tol && iterations >= next_check {
                certificate = relative_move(&self.prox_step(&z, &az, lambda), &z);
                if certificate <= cfg.certificate_tol {
                    converged = true;
                    break;
                }
                next_check = iterations + 10;
            }
        }
        if !converged && certificate.is_infinite() {
            certificate = self.certificate(&z, lambda);
            converged = certificate <= cfg.certificate_tol;
        }

        Ok(PenalizedSolution {
            latent: z,
            objective: f,
            iterations,
            restarts,
            converged,
            certificate,
            trace,
        })
    }
}

fn relative_move(next: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let diff = (next - z).norm();
    if diff == 0.0 {
        0.0
    } else {
        diff / z.norm()
    }
}

/// Solves one penalized latent group lasso problem from a cold start.
pub fn solve_penalized(
    y: &DVector<f64>,
    design: &DMatrix<f64>,
    groups: &LatentGroups,
    lambda: f64,
    cfg: &SolverConfig,
) -> Result<PenalizedSolution> {
    cfg.validate()?;
    PenalizedProblem::new(y, design, groups)?.solve(lambda, None, cfg)
}
