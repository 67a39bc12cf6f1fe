//! Numerical oracles for the three auxiliary inequalities behind the bounds:
//! the expected maximum of χ² variables, the ball bound relating `‖v‖` to the
//! dual norm on a support, and the projection-energy trace identity.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::width::summarize;
use crate::error::{Error, Result};
use crate::geometry::dual_norm;
use crate::subspace::{GroupStructure, SubspaceModel, SupportSet};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChisqCheck {
    pub l: usize,
    pub d: usize,
    pub trials: usize,
    pub empirical_mean_max: f64,
    pub stderr: f64,
    /// `(√(2 ln L) + √d)²`
    pub bound: f64,
    pub pass: bool,
}

/// Mean of the maximum of `L` i.i.d. `χ²_d` variables against
/// `(√(2 ln L) + √d)²`; passes when the mean is below the bound plus 3 stderr.
pub fn verify_chisq_max(l: usize, d: usize, trials: usize, seed: u64) -> Result<ChisqCheck> {
    if l == 0 || d == 0 || trials == 0 {
        return Err(Error::Config("L, d and trials must be positive".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let maxima: Vec<f64> = (0..trials)
        .map(|_| {
            (0..l)
                .map(|_| {
                    (0..d)
                        .map(|_| {
                            let g: f64 = StandardNormal.sample(&mut rng);
                            g * g
                        })
                        .sum::<f64>()
                })
                .fold(f64::MIN, f64::max)
        })
        .collect();
    let (mean, stderr) = summarize(&maxima);
    let bound = ((2.0 * (l as f64).ln()).sqrt() + (d as f64).sqrt()).powi(2);
    Ok(ChisqCheck {
        l,
        d,
        trials,
        empirical_mean_max: mean,
        stderr,
        bound,
        pass: mean <= bound + 3.0 * stderr,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BallCheck {
    pub label: String,
    pub k: usize,
    pub trials: usize,
    /// Largest `‖v‖ / ‖v‖*` seen over random `v` in the span of the support.
    pub max_ratio: f64,
    /// `√k · σ(K*)`, σ the smallest nonzero singular value of the support.
    pub bound_as_written: f64,
    /// `√k / σ(K*)`, the form that holds for non-perpendicular supports too.
    pub bound_corrected: f64,
    pub as_written_holds: bool,
    pub corrected_holds: bool,
}

/// Ratio `‖v‖/‖v‖*_A` for random `v = Σ_{j∈J} K_j a_j`, `a_j` standard normal.
pub fn verify_ball_bound(
    label: &str,
    model: &SubspaceModel,
    support: &SupportSet,
    trials: usize,
    seed: u64,
) -> Result<BallCheck> {
    let sigma = model.sigma_min_nonzero(Some(support))?;
    let k = support.k();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut max_ratio: f64 = 0.0;
    for _ in 0..trials {
        let mut v = DVector::zeros(model.p());
        for &j in support.indices() {
            let s = model.subspace(j);
            let a: Vec<f64> = (0..s.dim()).map(|_| StandardNormal.sample(&mut rng)).collect();
            s.add_embedded(&a, &mut v);
        }
        let d = dual_norm(&v, model);
        if d > 0.0 {
            max_ratio = max_ratio.max(v.norm() / d);
        }
    }
    let rk = (k as f64).sqrt();
    let slack = 1e-12;
    let bound_as_written = rk * sigma;
    let bound_corrected = if sigma > 0.0 { rk / sigma } else { f64::INFINITY };
    Ok(BallCheck {
        label: label.to_string(),
        k,
        trials,
        max_ratio,
        bound_as_written,
        bound_corrected,
        as_written_holds: max_ratio <= bound_as_written * (1.0 + slack),
        corrected_holds: max_ratio <= bound_corrected * (1.0 + slack),
    })
}

/// `‖v‖/‖v‖*` for `v` with one unit block per active subspace.
pub fn equal_block_ratio(model: &SubspaceModel, support: &SupportSet) -> f64 {
    let mut v = DVector::zeros(model.p());
    for &j in support.indices() {
        let s = model.subspace(j);
        let mut a = vec![0.0; s.dim()];
        a[0] = 1.0;
        s.add_embedded(&a, &mut v);
    }
    v.norm() / dual_norm(&v, model)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyCheck {
    pub label: String,
    pub s: usize,
    pub trials: usize,
    pub mc_mean: f64,
    pub stderr: f64,
    /// `‖K P_S Kᵀ (KKᵀ)⁻¹‖_F²`
    pub exact: f64,
    /// `κ(K)² |S|`
    pub upper: f64,
    pub pass: bool,
}

/// Monte-Carlo `E‖K_S w̄_S‖²` with `w̄ = Kᵀ(KKᵀ)⁻¹w` against the Frobenius
/// expression, for latent index subset `s` of the concatenation `K`.
pub fn verify_projection_energy(
    label: &str,
    model: &SubspaceModel,
    s: &[usize],
    trials: usize,
    seed: u64,
) -> Result<EnergyCheck> {
    let k = model.concatenation(None);
    let d = k.ncols();
    if s.iter().any(|&i| i >= d) {
        return Err(Error::Dimension(format!("latent index out of range (D = {d})")));
    }
    if trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let kappa = model.condition_number()?;
    let gram = &k * k.transpose();
    let chol = gram
        .cholesky()
        .ok_or(Error::SpanViolation { rank: 0, p: model.p() })?;
    let mut ks = DMatrix::zeros(model.p(), s.len());
    for (c, &i) in s.iter().enumerate() {
        ks.set_column(c, &k.column(i));
    }
    let exact = if s.is_empty() {
        0.0
    } else {
        let m = &ks * ks.transpose();
        // (K_S K_Sᵀ) G⁻¹ = (G⁻¹ K_S K_Sᵀ)ᵀ, same Frobenius norm
        chol.solve(&m).norm_squared()
    };
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let energies: Vec<f64> = (0..trials)
        .map(|_| {
            if s.is_empty() {
                return 0.0;
            }
            let w = DVector::from_fn(model.p(), |_, _| rng.sample::<f64, _>(StandardNormal));
            let wbar = k.tr_mul(&chol.solve(&w));
            let ws = DVector::from_iterator(s.len(), s.iter().map(|&i| wbar[i]));
            (&ks * ws).norm_squared()
        })
        .collect();
    let (mc_mean, stderr) = summarize(&energies);
    let upper = kappa * kappa * s.len() as f64;
    Ok(EnergyCheck {
        label: label.to_string(),
        s: s.len(),
        trials,
        mc_mean,
        stderr,
        exact,
        upper,
        pass: (mc_mean - exact).abs() <= 3.0 * stderr + 1e-12 * exact && exact <= upper * (1.0 + 1e-12),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LemmaReport {
    pub chisq: Vec<ChisqCheck>,
    pub ball: Vec<BallCheck>,
    /// Ratio reached by the equal-block vector on the disjoint model, and `√k`.
    pub equal_block: (f64, f64),
    pub energy: Vec<EnergyCheck>,
    /// The ball bound on two lines at 60°: informational, not part of `passed`.
    pub non_perpendicular_ball: BallCheck,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.chisq.iter().all(|c| c.pass)
            && self.ball.iter().all(|b| b.as_written_holds && b.corrected_holds)
            && (self.equal_block.0 - self.equal_block.1).abs() <= 1e-6
            && self.energy.iter().all(|e| e.pass)
    }

    pub fn to_text(&self) -> String {
        let mark = |b: bool| if b { "ok  " } else { "FAIL" };
        let mut out = String::new();
        for c in &self.chisq {
            out.push_str(&format!(
                "{} chisq-max L={:<4} d={:<3} mean {:>9.4} ± {:.4}  bound {:>9.4}\n",
                mark(c.pass),
                c.l,
                c.d,
                c.empirical_mean_max,
                c.stderr,
                c.bound
            ));
        }
        for b in &self.ball {
            out.push_str(&format!(
                "{} ball {:<14} k={} max ratio {:.6}  bound {:.6}\n",
                mark(b.as_written_holds && b.corrected_holds),
                b.label,
                b.k,
                b.max_ratio,
                b.bound_as_written
            ));
        }
        let (r, t) = self.equal_block;
        out.push_str(&format!(
            "{} ball equal-blocks ratio {:.9}  target {:.9}\n",
            mark((r - t).abs() <= 1e-6),
            r,
            t
        ));
        for e in &self.energy {
            out.push_str(&format!(
                "{} energy {:<14} |S|={} mc {:.5} ± {:.5}  exact {:.5}  upper {:.5}\n",
                mark(e.pass),
                e.label,
                e.s,
                e.mc_mean,
                e.stderr,
                e.exact,
                e.upper
            ));
        }
        let b = &self.non_perpendicular_ball;
        out.push_str(&format!(
            "note ball {} max ratio {:.4}: sqrt(k)*sigma = {:.4} ({}), sqrt(k)/sigma = {:.4} ({})\n",
            b.label,
            b.max_ratio,
            b.bound_as_written,
            if b.as_written_holds { "holds" } else { "violated" },
            b.bound_corrected,
            if b.corrected_holds { "holds" } else { "violated" },
        ));
        out
    }
}

/// `m` random `d`-dimensional subspaces carved from one random rotation of
/// `R^{md}`: mutually perpendicular but not canonical.
pub fn rotated_blocks(m: usize, d: usize, seed: u64) -> Result<SubspaceModel> {
    let p = m * d;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let q = g.qr().q();
    let bases: Vec<DMatrix<f64>> = (0..m).map(|i| q.columns(i * d, d).into_owned()).collect();
    SubspaceModel::orthonormalize(&bases)
}

/// Two unit lines in `R²` at angle `theta` (radians).
pub fn two_lines(theta: f64) -> Result<SubspaceModel> {
    SubspaceModel::orthonormalize(&[
        DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
        DMatrix::from_column_slice(2, 1, &[theta.cos(), theta.sin()]),
    ])
}

/// Runs every oracle: χ² maxima for `(L, d) ∈ {(10,3), (100,20), (2,1)}`,
/// ball bounds on disjoint, overlapping and rotated perpendicular models
/// (1000 vectors each) plus the equal-block case, and projection energies on
/// disjoint, 60° and random models.
pub fn verify_lemmas(trials: usize, seed: u64) -> Result<LemmaReport> {
    let chisq = [(10, 3), (100, 20), (2, 1)]
        .iter()
        .enumerate()
        .map(|(i, &(l, d))| verify_chisq_max(l, d, trials, seed.wrapping_add(i as u64)))
        .collect::<Result<Vec<_>>>()?;

    let disjoint = SubspaceModel::from_groups(&GroupStructure::contiguous(10, 4))?;
    let overlapping = SubspaceModel::from_groups(&GroupStructure::new(
        31,
        (0..10).map(|i| (3 * i..3 * i + 4).collect()).collect(),
    )?)?;
    let rotated = rotated_blocks(8, 3, seed ^ 0x5eed)?;
    let ball_trials = 1000;
    let ball = vec![
        verify_ball_bound("disjoint", &disjoint, &SupportSet::new(vec![1, 4, 7], 10)?, ball_trials, seed)?,
        verify_ball_bound(
            "overlapping",
            &overlapping,
            &SupportSet::new(vec![0, 1, 5], 10)?,
            ball_trials,
            seed + 1,
        )?,
        verify_ball_bound("rotated", &rotated, &SupportSet::new(vec![2, 5, 6], 8)?, ball_trials, seed + 2)?,
    ];
    let eq_support = SupportSet::new(vec![0, 3, 6, 9], 10)?;
    let equal_block = (equal_block_ratio(&disjoint, &eq_support), 2.0);

    let lines = two_lines(std::f64::consts::FRAC_PI_3)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xc0ffee);
    let random = SubspaceModel::orthonormalize(
        &[2, 2, 3]
            .iter()
            .map(|&d| DMatrix::from_fn(5, d, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect::<Vec<_>>(),
    )?;
    let small_disjoint = SubspaceModel::from_groups(&GroupStructure::contiguous(5, 3))?;
    let energy = vec![
        verify_projection_energy("disjoint", &small_disjoint, &[0, 1, 2, 7], trials, seed + 3)?,
        verify_projection_energy("lines-60deg", &lines, &[0, 1], trials, seed + 4)?,
        verify_projection_energy("random", &random, &[0, 2, 3, 6], trials, seed + 5)?,
    ];
    let non_perpendicular_ball =
        verify_ball_bound("lines-60deg", &lines, &SupportSet::new(vec![0, 1], 2)?, ball_trials, seed + 6)?;
    Ok(LemmaReport {
        chisq,
        ball,
        equal_block,
        energy,
        non_perpendicular_ball,
    })
}
