//! Error against noise level for piecewise constant signals recovered from
//! their Haar coefficients, group lasso against lasso.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::phase::trial_seed;
use super::width::summarize;
use crate::error::{Error, Result};
use crate::solver::{MeasurementEnsemble, Method, RecoveryMode, SolverConfig};
use crate::wavelet::{piecewise_constant, recover_in_wavelet_domain};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweepConfig {
    pub p: usize,
    pub jumps: usize,
    pub n: usize,
    /// Per-entry standard deviations of the measurement noise.
    pub sigmas: Vec<f64>,
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverConfig,
}

impl Default for NoiseSweepConfig {
    fn default() -> Self {
        NoiseSweepConfig {
            p: 1024,
            jumps: 5,
            n: 256,
            sigmas: vec![0.0, 0.02, 0.05, 0.1, 0.2],
            trials: 6,
            seed: 0,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseTrial {
    pub trial: usize,
    pub seed: u64,
    pub sigma: f64,
    pub method: Method,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseRow {
    pub sigma: f64,
    pub glasso_mean: f64,
    pub glasso_stderr: f64,
    pub lasso_mean: f64,
    pub lasso_stderr: f64,
    /// Mean and standard error of the paired difference glasso − lasso.
    pub diff_mean: f64,
    pub diff_stderr: f64,
    /// `diff_mean ≤ 2·diff_stderr`
    pub ordered: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseSweep {
    pub rows: Vec<NoiseRow>,
    pub trials: Vec<NoiseTrial>,
}

impl NoiseSweep {
    pub fn ordered(&self) -> bool {
        self.rows.iter().all(|r| r.ordered)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One trial at one noise level: the same signal, ensemble and noise
/// direction for both methods. The noisy program is given `δ = ‖θ‖`; the
/// noiseless level runs in exact mode.
fn one(cfg: &NoiseSweepConfig, sigma: f64, trial: usize) -> Result<[NoiseTrial; 2]> {
    let tseed = trial_seed(cfg.seed, trial);
    let mut rng = ChaCha20Rng::seed_from_u64(tseed);
    let x = piecewise_constant(cfg.p, cfg.jumps, &mut rng)?;
    let noise = DVector::from_fn(cfg.n, |_, _| {
        let g: f64 = StandardNormal.sample(&mut rng);
        sigma * g
    });
    let phi = MeasurementEnsemble::gaussian(cfg.n, cfg.p, tseed);
    let mode = if sigma > 0.0 {
        RecoveryMode::Noisy { delta: noise.norm() }
    } else {
        RecoveryMode::Exact
    };
    let xn = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let run = |method| -> Result<NoiseTrial> {
        let r = recover_in_wavelet_domain(&x, &phi, Some(&noise), method, mode, &cfg.solver)?;
        let err = r.signal_hat.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        Ok(NoiseTrial {
            trial,
            seed: tseed,
            sigma,
            method,
            rel_err: err / xn,
        })
    };
    Ok([run(Method::Glasso)?, run(Method::Lasso)?])
}

pub fn run_noise_sweep(cfg: &NoiseSweepConfig) -> Result<NoiseSweep> {
    if cfg.trials == 0 || cfg.sigmas.is_empty() {
        return Err(Error::Config("need at least one trial and one noise level".into()));
    }
    if cfg.sigmas.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
        return Err(Error::Config("noise levels must be finite and nonnegative".into()));
    }
    cfg.solver.validate()?;
    let jobs: Vec<(f64, usize)> = cfg
        .sigmas
        .iter()
        .flat_map(|&s| (0..cfg.trials).map(move |t| (s, t)))
        .collect();
    let pairs: Vec<[NoiseTrial; 2]> = jobs.par_iter().map(|&(s, t)| one(cfg, s, t)).collect::<Result<_>>()?;
    let rows = cfg
        .sigmas
        .iter()
        .enumerate()
        .map(|(i, &sigma)| {
            let chunk = &pairs[i * cfg.trials..(i + 1) * cfg.trials];
            let g: Vec<f64> = chunk.iter().map(|p| p[0].rel_err).collect();
            let l: Vec<f64> = chunk.iter().map(|p| p[1].rel_err).collect();
            let d: Vec<f64> = g.iter().zip(&l).map(|(a, b)| a - b).collect();
            let (gm, gs) = summarize(&g);
            let (lm, ls) = summarize(&l);
            let (dm, ds) = summarize(&d);
            NoiseRow {
                sigma,
                glasso_mean: gm,
                glasso_stderr: gs,
                lasso_mean: lm,
                lasso_stderr: ls,
                diff_mean: dm,
                diff_stderr: ds,
                ordered: dm <= 2.0 * ds,
            }
        })
        .collect();
    Ok(NoiseSweep {
        rows,
        trials: pairs.into_iter().flatten().collect(),
    })
}
