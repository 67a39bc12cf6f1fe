use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// An `n × p` measurement matrix.
///
/// Gaussian ensembles have i.i.d. `N(0, 1/n)` entries generated from a ChaCha
/// stream keyed by `(seed, n, p)`, filled column by column, so the same triple
/// always regenerates the same matrix.
#[derive(Debug, Clone)]
pub struct MeasurementEnsemble {
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub matrix: DMatrix<f64>,
}

impl MeasurementEnsemble {
    pub fn gaussian(n: usize, p: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(((n as u64) << 32) ^ p as u64);
        let scale = 1.0 / (n as f64).sqrt();
        let mut matrix = DMatrix::zeros(n, p);
        for v in matrix.iter_mut() {
            let g: f64 = StandardNormal.sample(&mut rng);
            *v = g * scale;
        }
        MeasurementEnsemble { n, p, seed, matrix }
    }

    /// Uses a caller-supplied matrix instead of a random draw.
    pub fn from_matrix(matrix: DMatrix<f64>) -> Self {
        let (n, p) = matrix.shape();
        MeasurementEnsemble {
            n,
            p,
            seed: 0,
            matrix,
        }
    }

    pub fn identity(p: usize) -> Self {
        Self::from_matrix(DMatrix::identity(p, p))
    }

    pub fn measure(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.p {
            return Err(Error::Dimension(format!(
                "signal length {} != ensemble p {}",
                x.len(),
                self.p
            )));
        }
        Ok(&self.matrix * x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regenerates_from_seed() {
        let a = MeasurementEnsemble::gaussian(30, 50, 11);
        let b = MeasurementEnsemble::gaussian(30, 50, 11);
        assert_eq!(a.matrix, b.matrix);
        let c = MeasurementEnsemble::gaussian(30, 50, 12);
        assert_ne!(a.matrix, c.matrix);
        let d = MeasurementEnsemble::gaussian(31, 50, 11);
        assert_ne!(a.matrix.row(0), d.matrix.row(0));
    }

    #[test]
    fn entry_variance_is_one_over_n() {
        let e = MeasurementEnsemble::gaussian(200, 500, 3);
        let m = e.matrix.iter().sum::<f64>() / 1e5;
        let v = e.matrix.iter().map(|x| x * x).sum::<f64>() / 1e5;
        assert!(m.abs() < 3e-4);
        assert!((v * 200.0 - 1.0).abs() < 0.02, "{v}");
    }
}
