//! Closed-form sample-complexity bounds. Logarithms are natural throughout.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_mkb(m: usize, k: usize, b: usize) -> Result<()> {
    if b == 0 {
        return Err(Error::Domain("B must be at least 1".into()));
    }
    if k > 0 && m <= k {
        return Err(Error::Domain(format!("need M > k, got M = {m}, k = {k}")));
    }
    Ok(())
}

/// `(√(2 ln(M−k)) + √B)²`
fn width_term(m: usize, k: usize, b: usize) -> f64 {
    let l = ((m - k) as f64).ln().max(0.0);
    ((2.0 * l).sqrt() + (b as f64).sqrt()).powi(2)
}

/// General union of subspaces:
/// `2 σ*²/σ² (√(2 ln(M−k)) + √B)² k + 2 k B κ²`.
pub fn theorem1_bound(
    m: usize,
    k: usize,
    b: usize,
    sigma_star: f64,
    sigma_full: f64,
    kappa: f64,
) -> Result<f64> {
    check_mkb(m, k, b)?;
    if !(sigma_full > 0.0) || !(sigma_star >= 0.0) || !(kappa >= 1.0) {
        return Err(Error::Domain(format!(
            "need σ > 0, σ* ≥ 0 and κ ≥ 1 (got {sigma_full}, {sigma_star}, {kappa})"
        )));
    }
    if k == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    let ratio = (sigma_star / sigma_full).powi(2);
    Ok(2.0 * ratio * width_term(m, k, b) * kf + 2.0 * kf * b as f64 * kappa * kappa)
}

/// Perpendicular subspaces: `k (√(2 ln(M−k)) + √B)² + k B`.
pub fn perpendicular_bound(m: usize, k: usize, b: usize) -> Result<f64> {
    check_mkb(m, k, b)?;
    if k == 0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    Ok(kf * width_term(m, k, b) + kf * b as f64)
}

/// k-group-sparse signals over M groups of size at most B. The group case is
/// the perpendicular one, so the value coincides with [`perpendicular_bound`].
pub fn theorem2_bound(m: usize, k: usize, b: usize) -> Result<f64> {
    perpendicular_bound(m, k, b)
}

/// The simplified form `2k·max(2 ln M, B) + kB`.
pub fn theorem2_upper(m: usize, k: usize, b: usize) -> Result<f64> {
    check_mkb(m, k, b)?;
    let kf = k as f64;
    Ok(2.0 * kf * (2.0 * (m as f64).ln()).max(b as f64) + kf * b as f64)
}

/// The ℓ1 baseline `(2s+1) ln(p−s)` for s-sparse vectors in `R^p`.
pub fn lasso_bound(s: usize, p: usize) -> Result<f64> {
    if s >= p {
        return Err(Error::Domain(format!("need s < p, got s = {s}, p = {p}")));
    }
    Ok((2 * s + 1) as f64 * ((p - s) as f64).ln())
}

/// Inflation for noisy recovery: `base/(1−ε)²`, `ε ∈ (0, 1)`.
pub fn noisy_bound(base: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(base / (1.0 - epsilon).powi(2))
}

/// Inputs of a [`BoundReport`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundInputs {
    #[serde(rename = "M")]
    pub m: usize,
    pub k: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub sigma_star: f64,
    pub sigma: f64,
    pub kappa: f64,
    pub epsilon: Option<f64>,
    /// Sparsity for the lasso baseline; defaults to `kB`.
    pub s: Option<usize>,
    /// Ambient dimension for the lasso baseline; defaults to `MB`.
    pub p: Option<usize>,
}

impl BoundInputs {
    pub fn new(m: usize, k: usize, b: usize) -> Self {
        BoundInputs {
            m,
            k,
            b,
            sigma_star: 1.0,
            sigma: 1.0,
            kappa: 1.0,
            epsilon: None,
            s: None,
            p: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub theorem1: f64,
    pub perpendicular: f64,
    pub theorem2: f64,
    pub theorem2_upper: f64,
    pub lasso_baseline: f64,
    /// `theorem2` inflated for noise, present when ε was given.
    pub noisy_inflated: Option<f64>,
}

impl BoundReport {
    pub fn compute(inputs: BoundInputs) -> Result<Self> {
        let (m, k, b) = (inputs.m, inputs.k, inputs.b);
        let theorem2 = theorem2_bound(m, k, b)?;
        let s = inputs.s.unwrap_or(k * b);
        let p = inputs.p.unwrap_or(m * b);
        Ok(BoundReport {
            theorem1: theorem1_bound(m, k, b, inputs.sigma_star, inputs.sigma, inputs.kappa)?,
            perpendicular: perpendicular_bound(m, k, b)?,
            theorem2,
            theorem2_upper: theorem2_upper(m, k, b)?,
            lasso_baseline: lasso_bound(s, p)?,
            noisy_inflated: inputs.epsilon.map(|e| noisy_bound(theorem2, e)).transpose()?,
            inputs,
        })
    }

    /// Aligned human-readable listing.
    pub fn to_text(&self) -> String {
        let i = &self.inputs;
        let mut out = format!(
            "M = {}  k = {}  B = {}  sigma* = {}  sigma = {}  kappa = {}\n",
            i.m, i.k, i.b, i.sigma_star, i.sigma, i.kappa
        );
        let mut row = |name: &str, v: f64| out.push_str(&format!("{name:<16}{v:>12.2}\n"));
        row("theorem1", self.theorem1);
        row("perpendicular", self.perpendicular);
        row("theorem2", self.theorem2);
        row("theorem2_upper", self.theorem2_upper);
        row("lasso", self.lasso_baseline);
        if let Some(v) = self.noisy_inflated {
            row("noisy", v);
        }
        out
    }
}
