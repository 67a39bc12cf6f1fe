//! Orthonormal Haar transforms and parent-child groupings of their coefficients.
//!
//! 1D coefficients use the heap layout: index 0 is the scaling coefficient and
//! detail node `i` has children `2i` and `2i + 1`. 2D coefficients use the
//! standard pyramid (Mallat) layout, row-major, where coefficient `(r, c)`
//! outside the coarsest approximation block has children `(2r + a, 2c + b)`.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{recover, solve_lasso, MeasurementEnsemble, Method, RecoveryMode, RecoveryResult, SolverConfig};
use crate::subspace::{GroupStructure, SubspaceModel};

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Magnitudes at or below this fraction of the largest coefficient are zero
/// when counting support.
pub const SUPPORT_TOL: f64 = 1e-10;

fn log2_exact(n: usize) -> Result<usize> {
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::Domain(format!("length {n} is not a power of two")));
    }
    Ok(n.trailing_zeros() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subband {
    Scaling,
    /// The single detail band of a 1D level.
    Detail,
    Horizontal,
    Vertical,
    Diagonal,
}

/// Where each coefficient of a transform lives. Level 1 is the finest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveletLayout {
    pub rows: usize,
    pub cols: usize,
    pub levels: usize,
    pub two_d: bool,
}

impl WaveletLayout {
    pub fn one_d(p: usize, levels: usize) -> Result<Self> {
        let max = log2_exact(p)?;
        if levels > max {
            return Err(Error::Domain(format!("{levels} levels exceed log2({p}) = {max}")));
        }
        Ok(WaveletLayout {
            rows: 1,
            cols: p,
            levels,
            two_d: false,
        })
    }

    pub fn two_d(rows: usize, cols: usize, levels: usize) -> Result<Self> {
        let max = log2_exact(rows)?.min(log2_exact(cols)?);
        if levels > max {
            return Err(Error::Domain(format!("{levels} levels exceed the image depth {max}")));
        }
        Ok(WaveletLayout {
            rows,
            cols,
            levels,
            two_d: true,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat indices of the approximation coefficients.
    pub fn scaling_indices(&self) -> Vec<usize> {
        if self.two_d {
            let (h, w) = (self.rows >> self.levels, self.cols >> self.levels);
            (0..h).flat_map(|r| (0..w).map(move |c| r * self.cols + c)).collect()
        } else {
            (0..self.cols >> self.levels).collect()
        }
    }

    /// Flat index of `(level, subband, position)`; `position` is `(0, i)` in 1D.
    pub fn index(&self, level: usize, band: Subband, position: (usize, usize)) -> Result<usize> {
        let (r, c) = position;
        let bad = || Error::Domain(format!("no coefficient at level {level}, {band:?}, {position:?}"));
        if band == Subband::Scaling {
            let (h, w) = if self.two_d {
                (self.rows >> self.levels, self.cols >> self.levels)
            } else {
                (1, self.cols >> self.levels)
            };
            return if r < h && c < w { Ok(r * self.cols + c) } else { Err(bad()) };
        }
        if level == 0 || level > self.levels {
            return Err(bad());
        }
        if self.two_d {
            let (h2, w2) = (self.rows >> level, self.cols >> level);
            if r >= h2 || c >= w2 {
                return Err(bad());
            }
            let (rr, cc) = match band {
                Subband::Horizontal => (r, w2 + c),
                Subband::Vertical => (h2 + r, c),
                Subband::Diagonal => (h2 + r, w2 + c),
                _ => return Err(bad()),
            };
            Ok(rr * self.cols + cc)
        } else {
            let n = self.cols >> level;
            if band != Subband::Detail || r != 0 || c >= n {
                return Err(bad());
            }
            Ok(n + c)
        }
    }

    /// Inverse of [`index`](Self::index). Scaling coefficients report level 0.
    pub fn locate(&self, idx: usize) -> Result<(usize, Subband, (usize, usize))> {
        if idx >= self.len() {
            return Err(Error::Domain(format!("index {idx} out of range")));
        }
        if self.two_d {
            let (r, c) = (idx / self.cols, idx % self.cols);
            for level in 1..=self.levels {
                let (h2, w2) = (self.rows >> level, self.cols >> level);
                let (h, w) = (2 * h2, 2 * w2);
                if r < h && c < w && (r >= h2 || c >= w2) {
                    let band = match (r >= h2, c >= w2) {
                        (false, true) => Subband::Horizontal,
                        (true, false) => Subband::Vertical,
                        _ => Subband::Diagonal,
                    };
                    return Ok((level, band, (r % h2.max(1), c % w2.max(1))));
                }
            }
            Ok((0, Subband::Scaling, (r, c)))
        } else {
            let n0 = self.cols >> self.levels;
            if idx < n0 {
                return Ok((0, Subband::Scaling, (0, idx)));
            }
            let depth = (usize::BITS - 1 - idx.leading_zeros()) as usize;
            let level = log2_exact(self.cols)? - depth;
            Ok((level, Subband::Detail, (0, idx - (1 << depth))))
        }
    }
}

fn analyze_step(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for j in 0..half {
        let (a, b) = (buf[2 * j], buf[2 * j + 1]);
        tmp[j] = (a + b) * SQRT_HALF;
        tmp[half + j] = (a - b) * SQRT_HALF;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

fn synthesize_step(buf: &mut [f64], tmp: &mut [f64]) {
    let half = buf.len() / 2;
    for j in 0..half {
        let (s, d) = (buf[j], buf[half + j]);
        tmp[2 * j] = (s + d) * SQRT_HALF;
        tmp[2 * j + 1] = (s - d) * SQRT_HALF;
    }
    buf.copy_from_slice(&tmp[..buf.len()]);
}

/// Multilevel orthonormal Haar analysis in the heap layout.
pub fn haar_analyze(signal: &[f64], levels: usize) -> Result<Vec<f64>> {
    let layout = WaveletLayout::one_d(signal.len(), levels)?;
    let mut out = signal.to_vec();
    let mut tmp = vec![0.0; signal.len()];
    for l in 0..layout.levels {
        let len = signal.len() >> l;
        analyze_step(&mut out[..len], &mut tmp);
    }
    Ok(out)
}

/// Inverse of [`haar_analyze`].
pub fn haar_synthesize(coeffs: &[f64], levels: usize) -> Result<Vec<f64>> {
    let layout = WaveletLayout::one_d(coeffs.len(), levels)?;
    let mut out = coeffs.to_vec();
    let mut tmp = vec![0.0; coeffs.len()];
    for l in (0..layout.levels).rev() {
        let len = coeffs.len() >> l;
        synthesize_step(&mut out[..len], &mut tmp);
    }
    Ok(out)
}

fn transform_2d(
    data: &[f64],
    rows: usize,
    cols: usize,
    levels: usize,
    inverse: bool,
) -> Result<Vec<f64>> {
    WaveletLayout::two_d(rows, cols, levels)?;
    if data.len() != rows * cols {
        return Err(Error::Dimension(format!("expected {} values, got {}", rows * cols, data.len())));
    }
    let mut out = data.to_vec();
    let mut tmp = vec![0.0; rows.max(cols)];
    let mut line = vec![0.0; rows.max(cols)];
    let step: fn(&mut [f64], &mut [f64]) = if inverse { synthesize_step } else { analyze_step };
    let rows_pass = |out: &mut [f64], tmp: &mut [f64], h: usize, w: usize| {
        for r in 0..h {
            step(&mut out[r * cols..r * cols + w], tmp);
        }
    };
    let cols_pass = |out: &mut [f64], tmp: &mut [f64], line: &mut [f64], h: usize, w: usize| {
        for c in 0..w {
            for r in 0..h {
                line[r] = out[r * cols + c];
            }
            step(&mut line[..h], tmp);
            for r in 0..h {
                out[r * cols + c] = line[r];
            }
        }
    };
    let order: Vec<usize> = if inverse {
        (0..levels).rev().collect()
    } else {
        (0..levels).collect()
    };
    for l in order {
        let (h, w) = (rows >> l, cols >> l);
        if inverse {
            cols_pass(&mut out, &mut tmp, &mut line, h, w);
            rows_pass(&mut out, &mut tmp, h, w);
        } else {
            rows_pass(&mut out, &mut tmp, h, w);
            cols_pass(&mut out, &mut tmp, &mut line, h, w);
        }
    }
    Ok(out)
}

/// Separable 2D Haar analysis of a row-major `rows × cols` image.
pub fn haar_analyze_2d(image: &[f64], rows: usize, cols: usize, levels: usize) -> Result<Vec<f64>> {
    transform_2d(image, rows, cols, levels, false)
}

pub fn haar_synthesize_2d(coeffs: &[f64], rows: usize, cols: usize, levels: usize) -> Result<Vec<f64>> {
    transform_2d(coeffs, rows, cols, levels, true)
}

/// One group `{parent, child}` per edge of the full detail tree of a length
/// `p` signal; the scaling coefficient is left unpenalized. `p = 2` has no
/// edges and yields the lone detail as a singleton.
pub fn parent_child_groups_1d(p: usize, levels: usize) -> Result<GroupStructure> {
    let full = log2_exact(p)?;
    if levels != full || p < 2 {
        return Err(Error::Domain(format!(
            "parent-child groups need the full decomposition ({full} levels) of p >= 2"
        )));
    }
    let groups = if p == 2 {
        vec![vec![1]]
    } else {
        (1..p / 2)
            .flat_map(|i| [vec![i, 2 * i], vec![i, 2 * i + 1]])
            .collect()
    };
    GroupStructure::with_unpenalized(p, groups, vec![0])
}

/// Quadtree groups: every detail coefficient with children is paired with
/// each of its four children, per subband. The approximation block is left
/// unpenalized. With a single level the details have no children and become
/// singletons.
pub fn parent_child_groups_2d(rows: usize, cols: usize, levels: usize) -> Result<GroupStructure> {
    let layout = WaveletLayout::two_d(rows, cols, levels)?;
    if levels == 0 {
        return Err(Error::Domain("at least one level is required".into()));
    }
    let scaling = layout.scaling_indices();
    let mut groups = Vec::new();
    for idx in 0..layout.len() {
        let (level, band, _) = layout.locate(idx)?;
        if band == Subband::Scaling {
            continue;
        }
        let (r, c) = (idx / cols, idx % cols);
        if level == 1 {
            if levels == 1 {
                groups.push(vec![idx]);
            }
            continue;
        }
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            groups.push(vec![idx, (2 * r + a) * cols + 2 * c + b]);
        }
    }
    GroupStructure::with_unpenalized(rows * cols, groups, scaling)
}

/// The "blocks" test signal: eleven jumps at fixed positions, sampled at
/// `t = (i + 1)/p`.
pub fn blocks(p: usize) -> Vec<f64> {
    const T: [f64; 11] = [0.1, 0.13, 0.15, 0.23, 0.25, 0.40, 0.44, 0.65, 0.76, 0.78, 0.81];
    const H: [f64; 11] = [4.0, -5.0, 3.0, -4.0, 5.0, -4.2, 2.1, 4.3, -3.1, 2.1, -4.2];
    (0..p)
        .map(|i| {
            let t = (i + 1) as f64 / p as f64;
            T.iter()
                .zip(H)
                .map(|(&tj, hj)| hj * (1.0 + (t - tj).signum()) / 2.0)
                .sum()
        })
        .collect()
}

/// Piecewise constant signal with `jumps` jumps at distinct uniform positions
/// and piece levels uniform on `[-1, 1]`.
pub fn piecewise_constant<R: Rng + ?Sized>(p: usize, jumps: usize, rng: &mut R) -> Result<Vec<f64>> {
    if jumps >= p {
        return Err(Error::Domain(format!("{jumps} jumps do not fit in {p} samples")));
    }
    let mut at: Vec<usize> = sample(rng, p - 1, jumps).into_iter().map(|j| j + 1).collect();
    at.sort_unstable();
    let levels: Vec<f64> = (0..=jumps).map(|_| rng.random_range(-1.0..=1.0)).collect();
    let mut out = Vec::with_capacity(p);
    let mut piece = 0;
    for i in 0..p {
        while piece < jumps && i >= at[piece] {
            piece += 1;
        }
        out.push(levels[piece]);
    }
    Ok(out)
}

/// Nonzero detail coefficients of a heap-layout vector.
pub fn detail_support(coeffs: &[f64]) -> Vec<usize> {
    let max = coeffs.iter().skip(1).fold(0.0f64, |m, v| m.max(v.abs()));
    (1..coeffs.len())
        .filter(|&i| coeffs[i].abs() > SUPPORT_TOL * max && max > 0.0)
        .collect()
}

/// Fewest parent-child groups whose union covers the detail support of a
/// full 1D decomposition: a minimum edge cover, i.e. `|S|` minus a maximum
/// matching of the tree induced on the support (found greedily from the
/// leaves up).
pub fn k_measured(coeffs: &[f64]) -> Result<usize> {
    let p = coeffs.len();
    log2_exact(p)?;
    let support = detail_support(coeffs);
    let mut in_s = vec![false; p];
    for &i in &support {
        in_s[i] = true;
    }
    let mut matched = vec![false; p];
    let mut matching = 0;
    for i in (2..p).rev() {
        let parent = i / 2;
        if in_s[i] && in_s[parent] && !matched[i] && !matched[parent] {
            matched[i] = true;
            matched[parent] = true;
            matching += 1;
        }
    }
    Ok(support.len() - matching)
}

/// Outcome of a recovery carried out on Haar coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WaveletRecovery {
    /// Recovery of the coefficient vector.
    pub coefficients: RecoveryResult,
    pub signal_hat: Vec<f64>,
}

/// Measures the full-depth Haar coefficients of `signal` with `phi` (plus an
/// optional noise vector), recovers them with parent-child groups (or the
/// lasso, scaling coefficient free in both) and synthesizes the estimate.
pub fn recover_in_wavelet_domain(
    signal: &[f64],
    phi: &MeasurementEnsemble,
    noise: Option<&DVector<f64>>,
    method: Method,
    mode: RecoveryMode,
    cfg: &SolverConfig,
) -> Result<WaveletRecovery> {
    let p = signal.len();
    let levels = log2_exact(p)?;
    let coeffs = DVector::from_vec(haar_analyze(signal, levels)?);
    let mut y = phi.measure(&coeffs)?;
    if let Some(e) = noise {
        if e.len() != y.len() {
            return Err(Error::Dimension("noise length != n".into()));
        }
        y += e;
    }
    let result = match method {
        Method::Glasso => {
            let model = SubspaceModel::from_groups(&parent_child_groups_1d(p, levels)?)?;
            recover(&y, phi, &model, mode, cfg, Some(&coeffs))?
        }
        Method::Lasso => solve_lasso(&y, phi, &[0], mode, cfg, Some(&coeffs))?,
    };
    let signal_hat = haar_synthesize(&result.x_hat, levels)?;
    Ok(WaveletRecovery {
        coefficients: result,
        signal_hat,
    })
}
