//! Union-of-subspaces models.
//!
//! A [`SubspaceModel`] is an ordered list of orthonormal bases `K_1 .. K_M`
//! whose concatenation spans `R^p`. Group structures are the special case
//! where every basis is a set of canonical columns. A model may also carry an
//! unpenalized subspace (the wavelet scaling coefficient, for instance) that
//! takes part in the span but not in the atomic set.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `KᵀK = I` for stored bases.
pub const ORTHO_TOL: f64 = 1e-10;
/// Relative tolerance (to the largest singular value) for rank decisions.
pub const RANK_TOL: f64 = 1e-10;
/// Below this smallest singular value the condition number is refused.
pub const SINGULAR_TOL: f64 = 1e-14;
/// Cross inner-product tolerance for the perpendicularity test.
pub const PERP_TOL: f64 = 1e-10;

/// Index subsets `G_1 .. G_M` of `{0 .. p-1}` (0-based in memory).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupStructure {
    pub p: usize,
    pub groups: Vec<Vec<usize>>,
    /// Coordinates that belong to no penalized group and are left free.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unpenalized: Vec<usize>,
}

impl GroupStructure {
    pub fn new(p: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        Self::with_unpenalized(p, groups, Vec::new())
    }

    pub fn with_unpenalized(
        p: usize,
        groups: Vec<Vec<usize>>,
        unpenalized: Vec<usize>,
    ) -> Result<Self> {
        let g = GroupStructure {
            p,
            groups,
            unpenalized,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidGroups("ambient dimension must be positive".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::InvalidGroups("at least one group is required".into()));
        }
        let mut covered = vec![false; self.p];
        for (gi, g) in self.groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidGroups(format!("group {gi} is empty")));
            }
            let mut seen = std::collections::HashSet::with_capacity(g.len());
            for &i in g {
                if i >= self.p {
                    return Err(Error::InvalidGroups(format!(
                        "group {gi} has index {i} outside 0..{}",
                        self.p
                    )));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidGroups(format!("group {gi} repeats index {i}")));
                }
                covered[i] = true;
            }
        }
        for &i in &self.unpenalized {
            if i >= self.p {
                return Err(Error::InvalidGroups(format!("unpenalized index {i} out of range")));
            }
            if covered[i] {
                return Err(Error::InvalidGroups(format!(
                    "unpenalized index {i} also belongs to a group"
                )));
            }
            covered[i] = true;
        }
        if let Some(miss) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidGroups(format!(
                "index {miss} is not covered by any group (span condition)"
            )));
        }
        Ok(())
    }

    /// Number of penalized groups `M`.
    pub fn m(&self) -> usize {
        self.groups.len()
    }

    /// Largest group size `B`.
    pub fn max_group_size(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn is_disjoint(&self) -> bool {
        let mut seen = vec![false; self.p];
        for &i in self.groups.iter().flatten() {
            if seen[i] {
                return false;
            }
            seen[i] = true;
        }
        true
    }

    /// Singleton groups, the lasso structure.
    pub fn singletons(p: usize) -> Self {
        GroupStructure {
            p,
            groups: (0..p).map(|i| vec![i]).collect(),
            unpenalized: Vec::new(),
        }
    }

    /// `m` consecutive disjoint groups of size `b`.
    pub fn contiguous(m: usize, b: usize) -> Self {
        GroupStructure {
            p: m * b,
            groups: (0..m).map(|g| (g * b..(g + 1) * b).collect()).collect(),
            unpenalized: Vec::new(),
        }
    }
}

/// Active subspace indices `J`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportSet {
    active: Vec<usize>,
}

impl SupportSet {
    pub fn new(active: Vec<usize>, m: usize) -> Result<Self> {
        let mut sorted = active.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("support indices must be distinct".into()));
        }
        if let Some(&bad) = sorted.iter().find(|&&j| j >= m) {
            return Err(Error::Domain(format!("support index {bad} >= M = {m}")));
        }
        Ok(SupportSet { active })
    }

    pub fn k(&self) -> usize {
        self.active.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.active
    }

    pub fn contains(&self, j: usize) -> bool {
        self.active.contains(&j)
    }
}

/// One orthonormal basis `K_i` (p × d_i).
#[derive(Debug, Clone)]
pub struct Subspace {
    basis: DMatrix<f64>,
    /// Set when every column is a canonical unit vector; holds their indices.
    coords: Option<Vec<usize>>,
}

impl Subspace {
    fn canonical(p: usize, coords: Vec<usize>) -> Self {
        let mut basis = DMatrix::zeros(p, coords.len());
        for (c, &i) in coords.iter().enumerate() {
            basis[(i, c)] = 1.0;
        }
        Subspace {
            basis,
            coords: Some(coords),
        }
    }

    fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        let coords = detect_canonical(&basis);
        Subspace { basis, coords }
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn coords(&self) -> Option<&[usize]> {
        self.coords.as_deref()
    }

    /// Latent coordinates `K_iᵀ x`.
    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.coords {
            Some(c) => DVector::from_iterator(c.len(), c.iter().map(|&i| x[i])),
            None => self.basis.tr_mul(x),
        }
    }

    /// `out += K_i alpha`.
    pub fn add_embedded(&self, alpha: &[f64], out: &mut DVector<f64>) {
        match &self.coords {
            Some(c) => {
                for (&i, &a) in c.iter().zip(alpha) {
                    out[i] += a;
                }
            }
            None => {
                for (col, &a) in alpha.iter().enumerate() {
                    if a != 0.0 {
                        out.axpy(a, &self.basis.column(col), 1.0);
                    }
                }
            }
        }
    }
}

fn detect_canonical(basis: &DMatrix<f64>) -> Option<Vec<usize>> {
    let mut coords = Vec::with_capacity(basis.ncols());
    for col in basis.column_iter() {
        let mut hit = None;
        for (i, &v) in col.iter().enumerate() {
            if v == 1.0 && hit.is_none() {
                hit = Some(i);
            } else if v != 0.0 {
                return None;
            }
        }
        coords.push(hit?);
    }
    Some(coords)
}

/// Gram-Schmidt with one re-orthogonalization pass, applied to a single basis.
fn gram_schmidt(raw: &DMatrix<f64>, index: usize) -> Result<DMatrix<f64>> {
    let (p, d) = raw.shape();
    let mut q = DMatrix::<f64>::zeros(p, d);
    for j in 0..d {
        let a = raw.column(j);
        let a_norm = a.norm();
        let mut v: DVector<f64> = a.into_owned();
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let c = qk.dot(&v);
                v.axpy(-c, &qk, 1.0);
            }
        }
        let nv = v.norm();
        if !(a_norm > 0.0) || nv <= RANK_TOL * a_norm {
            return Err(Error::RankDeficientBasis { index });
        }
        q.set_column(j, &(v / nv));
    }
    Ok(q)
}

/// The known union of subspaces.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    p: usize,
    subspaces: Vec<Subspace>,
    free: Option<Subspace>,
}

impl SubspaceModel {
    /// Orthonormalizes each raw basis separately (never across subspaces).
    pub fn orthonormalize(raw_bases: &[DMatrix<f64>]) -> Result<Self> {
        Self::orthonormalize_with_free(raw_bases, None)
    }

    pub fn orthonormalize_with_free(
        raw_bases: &[DMatrix<f64>],
        free: Option<&DMatrix<f64>>,
    ) -> Result<Self> {
        let p = raw_bases
            .first()
            .map(|b| b.nrows())
            .ok_or_else(|| Error::Domain("at least one basis is required".into()))?;
        if p == 0 {
            return Err(Error::Domain("ambient dimension must be positive".into()));
        }
        let mut subspaces = Vec::with_capacity(raw_bases.len());
        for (i, raw) in raw_bases.iter().enumerate() {
            if raw.nrows() != p {
                return Err(Error::Dimension(format!(
                    "basis {i} has {} rows, expected {p}",
                    raw.nrows()
                )));
            }
            if raw.ncols() == 0 || raw.ncols() > p {
                return Err(Error::RankDeficientBasis { index: i });
            }
            subspaces.push(Subspace::from_orthonormal(gram_schmidt(raw, i)?));
        }
        let free = match free {
            Some(f) => {
                if f.nrows() != p {
                    return Err(Error::Dimension("free basis row count".into()));
                }
                Some(Subspace::from_orthonormal(gram_schmidt(f, raw_bases.len())?))
            }
            None => None,
        };
        let model = SubspaceModel { p, subspaces, free };
        model.check_span()?;
        Ok(model)
    }

    /// `K_i = I^{G_i}`; unpenalized coordinates become the free subspace.
    pub fn from_groups(g: &GroupStructure) -> Result<Self> {
        g.validate()?;
        let subspaces = g
            .groups
            .iter()
            .map(|grp| Subspace::canonical(g.p, grp.clone()))
            .collect();
        let free = (!g.unpenalized.is_empty())
            .then(|| Subspace::canonical(g.p, g.unpenalized.clone()));
        Ok(SubspaceModel {
            p: g.p,
            subspaces,
            free,
        })
    }

    fn check_span(&self) -> Result<()> {
        let sv = self.singular_values(None);
        let smax = sv.first().copied().unwrap_or(0.0);
        let rank = sv.iter().filter(|&&s| s > RANK_TOL * smax).count();
        if rank < self.p {
            return Err(Error::SpanViolation { rank, p: self.p });
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of penalized subspaces `M`.
    pub fn m(&self) -> usize {
        self.subspaces.len()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.subspaces.iter().map(Subspace::dim).collect()
    }

    /// `B = max_i d_i`.
    pub fn max_dim(&self) -> usize {
        self.subspaces.iter().map(Subspace::dim).max().unwrap_or(0)
    }

    pub fn subspace(&self, i: usize) -> &Subspace {
        &self.subspaces[i]
    }

    pub fn subspaces(&self) -> &[Subspace] {
        &self.subspaces
    }

    pub fn free(&self) -> Option<&Subspace> {
        self.free.as_ref()
    }

    pub fn is_canonical(&self) -> bool {
        self.subspaces
            .iter()
            .chain(self.free.iter())
            .all(|s| s.coords.is_some())
    }

    /// `[K_j]` over the restriction (or all subspaces plus the free one).
    pub fn concatenation(&self, restriction: Option<&SupportSet>) -> DMatrix<f64> {
        let parts = self.parts(restriction);
        let cols: usize = parts.iter().map(|s| s.dim()).sum();
        let mut k = DMatrix::zeros(self.p, cols);
        let mut c0 = 0;
        for s in parts {
            k.columns_mut(c0, s.dim()).copy_from(&s.basis);
            c0 += s.dim();
        }
        k
    }

    fn parts(&self, restriction: Option<&SupportSet>) -> Vec<&Subspace> {
        match restriction {
            Some(r) => r.indices().iter().map(|&j| &self.subspaces[j]).collect(),
            None => self.subspaces.iter().chain(self.free.iter()).collect(),
        }
    }

    /// Singular values of the (restricted) concatenation, descending.
    pub fn singular_values(&self, restriction: Option<&SupportSet>) -> Vec<f64> {
        let parts = self.parts(restriction);
        let cols: usize = parts.iter().map(|s| s.dim()).sum();
        let count = cols.min(self.p);
        let mut sv: Vec<f64> = if parts.iter().all(|s| s.coords.is_some()) {
            // KKᵀ is diagonal with the coordinate multiplicities on it.
            let mut mult = vec![0usize; self.p];
            for s in &parts {
                for &i in s.coords.as_ref().unwrap() {
                    mult[i] += 1;
                }
            }
            let mut v: Vec<f64> = mult
                .iter()
                .filter(|&&m| m > 0)
                .map(|&m| (m as f64).sqrt())
                .collect();
            v.resize(count.max(v.len()), 0.0);
            v
        } else {
            let k = self.concatenation(restriction);
            k.svd(false, false).singular_values.iter().copied().collect()
        };
        sv.sort_by(|a, b| b.total_cmp(a));
        sv.truncate(count);
        sv
    }

    /// Smallest singular value of the (restricted) concatenation.
    pub fn sigma_min(&self, restriction: Option<&SupportSet>) -> Result<f64> {
        if let Some(r) = restriction {
            if r.k() == 0 {
                return Err(Error::EmptyRestriction);
            }
        }
        Ok(self
            .singular_values(restriction)
            .last()
            .copied()
            .unwrap_or(0.0))
    }

    /// Smallest singular value above `RANK_TOL·σ_max` of the (restricted)
    /// concatenation, i.e. the smallest one on its range.
    pub fn sigma_min_nonzero(&self, restriction: Option<&SupportSet>) -> Result<f64> {
        if let Some(r) = restriction {
            if r.k() == 0 {
                return Err(Error::EmptyRestriction);
            }
        }
        let sv = self.singular_values(restriction);
        let max = sv.first().copied().unwrap_or(0.0);
        Ok(sv
            .into_iter()
            .filter(|&s| s > RANK_TOL * max)
            .last()
            .unwrap_or(0.0))
    }

    pub fn sigma_max(&self) -> f64 {
        self.singular_values(None).first().copied().unwrap_or(0.0)
    }

    /// `κ(K) = σ_max / σ_min` of the full concatenation.
    pub fn condition_number(&self) -> Result<f64> {
        let sv = self.singular_values(None);
        let smin = sv.last().copied().unwrap_or(0.0);
        if smin < SINGULAR_TOL {
            return Err(Error::NearSingular { sigma_min: smin });
        }
        Ok(sv[0] / smin)
    }

    /// Pairwise perpendicularity after removing each pairwise intersection.
    ///
    /// The singular values of `K_iᵀK_j` are the cosines of the principal
    /// angles; the intersection contributes cosines equal to one and the
    /// remaining directions are orthogonal iff every other cosine vanishes.
    pub fn is_perpendicular(&self) -> bool {
        for (i, a) in self.subspaces.iter().enumerate() {
            for b in &self.subspaces[i + 1..] {
                if a.coords.is_some() && b.coords.is_some() {
                    continue;
                }
                let cross = a.basis.tr_mul(&b.basis);
                let sv = cross.svd(false, false).singular_values;
                if sv
                    .iter()
                    .any(|&c| c > PERP_TOL && c < 1.0 - PERP_TOL)
                {
                    return false;
                }
            }
        }
        true
    }

    /// Total latent dimension `Σ d_i`, including the free subspace.
    pub fn latent_dim(&self) -> usize {
        self.subspaces
            .iter()
            .chain(self.free.iter())
            .map(Subspace::dim)
            .sum()
    }

    /// `Σ_i K_i alpha_i` for per-subspace coefficients.
    pub fn synthesize(&self, latent: &[DVector<f64>], free: Option<&DVector<f64>>) -> DVector<f64> {
        let mut x = DVector::zeros(self.p);
        for (s, a) in self.subspaces.iter().zip(latent) {
            s.add_embedded(a.as_slice(), &mut x);
        }
        if let (Some(s), Some(a)) = (&self.free, free) {
            s.add_embedded(a.as_slice(), &mut x);
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn line(theta_deg: f64) -> DMatrix<f64> {
        let t = theta_deg.to_radians();
        DMatrix::from_column_slice(2, 1, &[t.cos(), t.sin()])
    }

    fn two_lines(theta_deg: f64) -> SubspaceModel {
        SubspaceModel::orthonormalize(&[line(0.0), line(theta_deg)]).unwrap()
    }

    #[test]
    fn scaled_orthogonal_columns_become_identity() {
        let raw = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let m = SubspaceModel::orthonormalize(&[raw]).unwrap();
        assert_abs_diff_eq!(m.subspace(0).basis().clone(), DMatrix::identity(2, 2), epsilon = 1e-15);
    }

    #[test]
    fn orthonormal_input_is_unchanged() {
        let c = (0.3f64).cos();
        let s = (0.3f64).sin();
        let raw = DMatrix::from_row_slice(3, 2, &[c, 0.0, s, 0.0, 0.0, 1.0]);
        let other = DMatrix::from_row_slice(3, 1, &[-s, c, 0.0]);
        let m = SubspaceModel::orthonormalize(&[raw.clone(), other]).unwrap();
        assert_abs_diff_eq!(m.subspace(0).basis().clone(), raw, epsilon = 1e-12);
    }

    #[test]
    fn orthonormalization_is_per_subspace() {
        let m = two_lines(60.0);
        // Each basis matches a QR of that basis alone (up to column sign).
        for (i, raw) in [line(0.0), line(60.0)].iter().enumerate() {
            let q = raw.clone().qr().q();
            let b = m.subspace(i).basis();
            let sign = (q.column(0).dot(&b.column(0))).signum();
            assert_abs_diff_eq!(b.clone(), q * sign, epsilon = 1e-14);
        }
        let u = m.subspace(1).basis();
        assert_abs_diff_eq!(u[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn rank_deficient_basis_is_named() {
        let raw = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        let err = SubspaceModel::orthonormalize(&[DMatrix::identity(2, 1), raw]).unwrap_err();
        assert!(matches!(err, Error::RankDeficientBasis { index: 1 }));
    }

    #[test]
    fn span_violation_detected() {
        let err = SubspaceModel::orthonormalize(&[line(0.0), line(0.0)]).unwrap_err();
        assert!(matches!(err, Error::SpanViolation { rank: 1, p: 2 }));
    }

    #[test]
    fn from_groups_bases() {
        let g = GroupStructure::new(4, vec![vec![0, 1], vec![2, 3]]).unwrap();
        let m = SubspaceModel::from_groups(&g).unwrap();
        assert_eq!(m.m(), 2);
        assert_eq!(m.subspace(1).coords(), Some(&[2usize, 3][..]));
        assert_eq!(m.subspace(1).basis()[(2, 0)], 1.0);
        assert_eq!(m.subspace(1).basis()[(3, 1)], 1.0);

        let g = GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]]).unwrap();
        let m = SubspaceModel::from_groups(&g).unwrap();
        assert_eq!(m.subspace(0).coords(), Some(&[0usize, 1][..]));
        assert_eq!(m.subspace(1).coords(), Some(&[1usize, 2][..]));
        assert!(m.is_perpendicular());
    }

    #[test]
    fn headline_scale_disjoint_groups() {
        let g = GroupStructure::contiguous(100, 20);
        let m = SubspaceModel::from_groups(&g).unwrap();
        assert_eq!((m.p(), m.m(), m.max_dim()), (2000, 100, 20));
        assert_eq!(m.sigma_min(None).unwrap(), 1.0);
        assert_eq!(m.condition_number().unwrap(), 1.0);
    }

    #[test]
    fn two_line_constants() {
        let m = two_lines(60.0);
        assert_abs_diff_eq!(m.sigma_min(None).unwrap(), 0.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.condition_number().unwrap(), 3f64.sqrt(), epsilon = 1e-12);
        let m = two_lines(90.0);
        assert_abs_diff_eq!(m.sigma_min(None).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.condition_number().unwrap(), 1.0, epsilon = 1e-12);
        assert!(!two_lines(60.0).is_perpendicular());
        assert!(two_lines(90.0).is_perpendicular());
    }

    #[test]
    fn aligned_lines_refused() {
        let raw = DMatrix::from_column_slice(2, 1, &[1.0, 1e-16]);
        let m = SubspaceModel::orthonormalize(&[line(0.0), raw, line(90.0)]).unwrap();
        // the full model spans, but a restricted aligned pair is singular
        let r = SupportSet::new(vec![0, 1], 3).unwrap();
        assert!(m.sigma_min(Some(&r)).unwrap() < 1e-14);
        let near = DMatrix::from_column_slice(2, 1, &[1.0, 1e-20]);
        assert!(SubspaceModel::orthonormalize(&[line(0.0), near]).is_err());
    }

    #[test]
    fn constants_monotone_in_angle() {
        let angles = [10.0, 30.0, 60.0, 90.0];
        let sig: Vec<f64> = angles.iter().map(|&a| two_lines(a).sigma_min(None).unwrap()).collect();
        let kap: Vec<f64> = angles
            .iter()
            .map(|&a| two_lines(a).condition_number().unwrap())
            .collect();
        assert!(sig.windows(2).all(|w| w[0] < w[1]));
        assert!(kap.windows(2).all(|w| w[0] > w[1]));
        assert_abs_diff_eq!(sig[3], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kap[3], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_restriction_is_error() {
        let m = two_lines(60.0);
        let r = SupportSet::new(vec![], 2).unwrap();
        assert!(matches!(m.sigma_min(Some(&r)), Err(Error::EmptyRestriction)));
    }

    #[test]
    fn restricted_sigma_canonical_matches_svd() {
        let g = GroupStructure::new(5, vec![vec![0, 1, 2], vec![2, 3], vec![3, 4]]).unwrap();
        let m = SubspaceModel::from_groups(&g).unwrap();
        for active in [vec![0], vec![0, 1], vec![1, 2], vec![0, 1, 2]] {
            let r = SupportSet::new(active, 3).unwrap();
            let fast = m.singular_values(Some(&r));
            let k = m.concatenation(Some(&r));
            let mut slow: Vec<f64> = k.svd(false, false).singular_values.iter().copied().collect();
            slow.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(fast.len(), slow.len());
            for (a, b) in fast.iter().zip(&slow) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn group_validation() {
        assert!(GroupStructure::new(3, vec![vec![0, 1]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 1, 1], vec![2]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 3], vec![1, 2]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![], vec![0, 1, 2]]).is_err());
        assert!(GroupStructure::with_unpenalized(3, vec![vec![1, 2]], vec![0]).is_ok());
    }
}
