//! Signal generators for the synthetic group-sparse scenarios.

use nalgebra::DVector;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::GroupStructure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `M` contiguous disjoint groups of size `B`, `p = MB`.
    NoOverlap,
    /// Consecutive groups share `overlap` elements, `p = M(B − overlap) + overlap`.
    PartialOverlap,
    /// `M/2` disjoint groups, the rest drawn uniformly from the same indices.
    RandomOverlap,
    /// Groups supplied in the spec.
    Custom,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::NoOverlap => "no_overlap",
            ScenarioKind::PartialOverlap => "partial_overlap",
            ScenarioKind::RandomOverlap => "random_overlap",
            ScenarioKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueDist {
    /// Uniform on `[0, 1]`.
    #[default]
    Uniform01,
    /// Uniform on `[-1, 1]`.
    UniformPm1,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "B")]
    pub b: usize,
    pub k: usize,
    #[serde(default)]
    pub overlap: usize,
    #[serde(default)]
    pub value_dist: ValueDist,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<GroupStructure>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, m: usize, b: usize, k: usize) -> Self {
        ScenarioSpec {
            kind,
            m,
            b,
            k,
            overlap: 0,
            value_dist: ValueDist::Uniform01,
            seed: 0,
            groups: None,
        }
    }

    pub fn with_overlap(mut self, overlap: usize) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.kind == ScenarioKind::Custom {
            let Some(g) = &self.groups else {
                return bad("custom scenario needs groups".into());
            };
            g.validate()?;
            if self.k > g.m() {
                return bad(format!("k = {} exceeds M = {}", self.k, g.m()));
            }
            return Ok(());
        }
        if self.m == 0 || self.b == 0 {
            return bad("M and B must be positive".into());
        }
        if self.k > self.m {
            return bad(format!("k = {} exceeds M = {}", self.k, self.m));
        }
        if self.kind == ScenarioKind::PartialOverlap && self.overlap >= self.b {
            return bad(format!("overlap {} must be below B = {}", self.overlap, self.b));
        }
        if self.kind == ScenarioKind::RandomOverlap && self.m < 2 {
            return bad("random overlap needs M >= 2".into());
        }
        Ok(())
    }

    /// The group structure; random for [`ScenarioKind::RandomOverlap`].
    pub fn groups<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupStructure> {
        self.validate()?;
        let (m, b) = (self.m, self.b);
        match self.kind {
            ScenarioKind::NoOverlap => Ok(GroupStructure::contiguous(m, b)),
            ScenarioKind::PartialOverlap => {
                let stride = b - self.overlap;
                let p = m * stride + self.overlap;
                GroupStructure::new(p, (0..m).map(|i| (i * stride..i * stride + b).collect()).collect())
            }
            ScenarioKind::RandomOverlap => {
                let half = m / 2;
                let p = half * b;
                let mut groups: Vec<Vec<usize>> = (0..half).map(|i| (i * b..(i + 1) * b).collect()).collect();
                for _ in half..m {
                    let mut g = sample(rng, p, b).into_vec();
                    g.sort_unstable();
                    groups.push(g);
                }
                GroupStructure::new(p, groups)
            }
            ScenarioKind::Custom => Ok(self.groups.clone().expect("validated")),
        }
    }
}

/// Ground truth: the signal, its active groups `J` and one latent
/// decomposition (each coordinate credited to the first active group holding it).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SparseSignal {
    pub x: Vec<f64>,
    pub active: Vec<usize>,
    pub latent: Vec<Vec<f64>>,
    /// Number of nonzero coordinates.
    pub s: usize,
}

impl SparseSignal {
    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    pub fn k(&self) -> usize {
        self.active.len()
    }
}

/// Draws `k` active groups uniformly and fills their union with values from
/// `dist`.
pub fn signal_on_groups<R: Rng + ?Sized>(
    g: &GroupStructure,
    k: usize,
    dist: ValueDist,
    rng: &mut R,
) -> Result<SparseSignal> {
    if k > g.m() {
        return Err(Error::Config(format!("k = {k} exceeds M = {}", g.m())));
    }
    let mut active = sample(rng, g.m(), k).into_vec();
    active.sort_unstable();
    let mut x = vec![0.0; g.p];
    let mut owner = vec![usize::MAX; g.p];
    let mut latent = Vec::with_capacity(k);
    for (slot, &a) in active.iter().enumerate() {
        let mut block = Vec::with_capacity(g.groups[a].len());
        for &i in &g.groups[a] {
            if owner[i] == usize::MAX {
                owner[i] = slot;
                // keep the support exact: a zero draw would shrink it
                let mut v = 0.0;
                while v == 0.0 {
                    v = match dist {
                        ValueDist::Uniform01 => rng.random::<f64>(),
                        ValueDist::UniformPm1 => rng.random_range(-1.0..1.0),
                    };
                }
                x[i] = v;
                block.push(v);
            } else {
                block.push(0.0);
            }
        }
        latent.push(block);
    }
    let s = x.iter().filter(|&&v| v != 0.0).count();
    Ok(SparseSignal { x, active, latent, s })
}

/// Signal and group structure for `spec`, reproducible from `spec.seed`.
pub fn generate_signal(spec: &ScenarioSpec) -> Result<(SparseSignal, GroupStructure)> {
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let g = spec.groups(&mut rng)?;
    let sig = signal_on_groups(&g, spec.k, spec.value_dist, &mut rng)?;
    Ok((sig, g))
}
