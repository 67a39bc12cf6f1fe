use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Knobs for the continuation solver.
///
/// The step size is always `1/L` with `L = σ_max²` of the latent design, so it
/// is not configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Explicit descending λ grid; when absent a log-spaced grid from λ_max is used.
    pub lambda_grid: Option<Vec<f64>>,
    pub grid_points: usize,
    /// Smallest grid value as a fraction of λ_max.
    pub grid_floor: f64,
    pub max_iters: usize,
    /// Relative objective change that triggers the fixed-point check.
    pub tol: f64,
    /// Relative fixed-point residual required to call a solve converged.
    pub certificate_tol: f64,
    pub debias: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_grid: None,
            grid_points: 30,
            grid_floor: 1e-6,
            max_iters: 400,
            tol: 1e-9,
            certificate_tol: 1e-7,
            debias: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(grid) = &self.lambda_grid {
            if grid.is_empty() {
                return Err(Error::Config("lambda grid is empty".into()));
            }
            if grid.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
                return Err(Error::Config("lambda grid values must be positive".into()));
            }
            if grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::Config("lambda grid must be strictly descending".into()));
            }
        } else {
            if self.grid_points == 0 {
                return Err(Error::Config("grid_points must be >= 1".into()));
            }
            if !(self.grid_floor > 0.0 && self.grid_floor < 1.0) {
                return Err(Error::Config("grid_floor must lie in (0, 1)".into()));
            }
        }
        if !(self.tol > 0.0) || !(self.certificate_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        Ok(())
    }

    /// The λ grid for a problem whose null-solution threshold is `lambda_max`.
    pub fn grid(&self, lambda_max: f64) -> Vec<f64> {
        if let Some(g) = &self.lambda_grid {
            return g.clone();
        }
        let n = self.grid_points;
        if n == 1 {
            return vec![lambda_max];
        }
        let log_floor = self.grid_floor.ln();
        (0..n)
            .map(|i| lambda_max * (log_floor * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_spans_six_decades() {
        let g = SolverConfig::default().grid(2.0);
        assert_eq!(g.len(), 30);
        assert_eq!(g[0], 2.0);
        assert!((g[29] / 2e-6 - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut c = SolverConfig::default();
        c.lambda_grid = Some(vec![]);
        assert!(c.validate().is_err());
        c.lambda_grid = Some(vec![1.0, 1.0]);
        assert!(c.validate().is_err());
        c.lambda_grid = Some(vec![1.0, 0.5]);
        assert!(c.validate().is_ok());
        c.tol = 0.0;
        assert!(c.validate().is_err());
    }
}
