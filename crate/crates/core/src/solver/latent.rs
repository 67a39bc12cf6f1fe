//! Replication of overlapping coefficients into disjoint latent blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::subspace::SubspaceModel;

/// A partition of the latent index set into penalized blocks plus free indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatentGroups {
    blocks: Vec<Vec<usize>>,
    free: Vec<usize>,
    dim: usize,
}

impl LatentGroups {
    pub fn new(dim: usize, blocks: Vec<Vec<usize>>, free: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &i in blocks.iter().flatten().chain(free.iter()) {
            if i >= dim || seen[i] {
                return Err(Error::InvalidGroups(format!(
                    "latent index {i} repeated or outside 0..{dim}"
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidGroups("latent groups do not cover every index".into()));
        }
        Ok(LatentGroups { blocks, free, dim })
    }

    /// Consecutive blocks of the given sizes followed by `free` free indices.
    pub fn consecutive(sizes: &[usize], free: usize) -> Self {
        let mut start = 0;
        let blocks = sizes
            .iter()
            .map(|&d| {
                let b: Vec<usize> = (start..start + d).collect();
                start += d;
                b
            })
            .collect();
        LatentGroups {
            blocks,
            free: (start..start + free).collect(),
            dim: start + free,
        }
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn block_norm(&self, v: &DVector<f64>, g: usize) -> f64 {
        self.blocks[g].iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt()
    }

    /// `Σ_G ‖v_G‖` over penalized blocks.
    pub fn penalty(&self, v: &DVector<f64>) -> f64 {
        (0..self.blocks.len()).map(|g| self.block_norm(v, g)).sum()
    }

    /// `max_G ‖v_G‖` over penalized blocks.
    pub fn dual(&self, v: &DVector<f64>) -> f64 {
        (0..self.blocks.len())
            .map(|g| self.block_norm(v, g))
            .fold(0.0, f64::max)
    }

    pub(crate) fn shrink_in_place(&self, v: &mut DVector<f64>, threshold: f64) {
        for block in &self.blocks {
            let norm = block.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt();
            let factor = if norm > threshold {
                1.0 - threshold / norm
            } else {
                0.0
            };
            for &i in block {
                v[i] *= factor;
            }
        }
    }
}

/// Block soft-thresholding: `v_G · max(0, 1 − threshold/‖v_G‖)` on every
/// penalized block; free indices pass through.
pub fn group_prox(v: &DVector<f64>, threshold: f64, groups: &LatentGroups) -> Result<DVector<f64>> {
    if !(threshold >= 0.0) {
        return Err(Error::Domain(format!("prox threshold must be >= 0, got {threshold}")));
    }
    if v.len() != groups.dim() {
        return Err(Error::Dimension("prox input length".into()));
    }
    let mut out = v.clone();
    groups.shrink_in_place(&mut out, threshold);
    Ok(out)
}

/// Builds `[Φ K_1 … Φ K_M Φ K_free]` and the matching consecutive latent blocks.
pub fn replicate(design: &DMatrix<f64>, model: &SubspaceModel) -> Result<(DMatrix<f64>, LatentGroups)> {
    if design.ncols() != model.p() {
        return Err(Error::Dimension(format!(
            "design has {} columns, model p = {}",
            design.ncols(),
            model.p()
        )));
    }
    let n = design.nrows();
    let total = model.latent_dim();
    let mut latent = DMatrix::zeros(n, total);
    let mut c0 = 0;
    for s in model.subspaces().iter().chain(model.free()) {
        match s.coords() {
            Some(coords) => {
                for (k, &i) in coords.iter().enumerate() {
                    latent.column_mut(c0 + k).copy_from(&design.column(i));
                }
            }
            None => {
                latent.columns_mut(c0, s.dim()).copy_from(&(design * s.basis()));
            }
        }
        c0 += s.dim();
    }
    let free = model.free().map_or(0, |s| s.dim());
    Ok((latent, LatentGroups::consecutive(&model.dims(), free)))
}

/// Splits a latent vector into per-subspace coefficients and the free part.
pub fn split_latent(z: &DVector<f64>, model: &SubspaceModel) -> (Vec<DVector<f64>>, Option<DVector<f64>>) {
    let mut c0 = 0;
    let mut parts = Vec::with_capacity(model.m());
    for s in model.subspaces() {
        parts.push(z.rows(c0, s.dim()).into_owned());
        c0 += s.dim();
    }
    let free = model.free().map(|s| z.rows(c0, s.dim()).into_owned());
    (parts, free)
}
