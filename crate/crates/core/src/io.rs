//! File formats: model JSON and plain-text signals.
//!
//! A model document is `{"p": .., "groups": [[..]]}` or
//! `{"p": .., "bases": [[[..]]]}` where every basis is a list of columns of
//! length `p`. Group and unpenalized indices are 1-based on disk.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subspace::{GroupStructure, SubspaceModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub p: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bases: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unpenalized: Vec<usize>,
}

fn to_zero_based(v: &[usize], what: &str) -> Result<Vec<usize>> {
    v.iter()
        .map(|&i| {
            i.checked_sub(1)
                .ok_or_else(|| Error::Parse(format!("{what} indices are 1-based; found 0")))
        })
        .collect()
}

impl ModelFile {
    pub fn from_groups(g: &GroupStructure) -> Self {
        ModelFile {
            p: g.p,
            groups: Some(g.groups.iter().map(|grp| grp.iter().map(|i| i + 1).collect()).collect()),
            bases: None,
            unpenalized: g.unpenalized.iter().map(|i| i + 1).collect(),
        }
    }

    pub fn from_bases(p: usize, bases: &[DMatrix<f64>]) -> Self {
        ModelFile {
            p,
            groups: None,
            bases: Some(
                bases
                    .iter()
                    .map(|b| b.column_iter().map(|c| c.iter().copied().collect()).collect())
                    .collect(),
            ),
            unpenalized: Vec::new(),
        }
    }

    /// The group structure, when the file describes one.
    pub fn group_structure(&self) -> Result<Option<GroupStructure>> {
        match &self.groups {
            Some(groups) => {
                let zb = groups
                    .iter()
                    .map(|g| to_zero_based(g, "group"))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Some(GroupStructure::with_unpenalized(
                    self.p,
                    zb,
                    to_zero_based(&self.unpenalized, "unpenalized")?,
                )?))
            }
            None => Ok(None),
        }
    }

    pub fn to_model(&self) -> Result<SubspaceModel> {
        match (&self.groups, &self.bases) {
            (Some(_), Some(_)) => Err(Error::Parse("'groups' and 'bases' are mutually exclusive".into())),
            (None, None) => Err(Error::Parse("model needs 'groups' or 'bases'".into())),
            (Some(_), None) => SubspaceModel::from_groups(&self.group_structure()?.expect("groups present")),
            (None, Some(bases)) => {
                if !self.unpenalized.is_empty() {
                    return Err(Error::Parse("'unpenalized' applies to group models only".into()));
                }
                let mats = bases
                    .iter()
                    .enumerate()
                    .map(|(i, cols)| {
                        if cols.is_empty() || cols.iter().any(|c| c.len() != self.p) {
                            return Err(Error::Parse(format!("basis {i} must be a nonempty list of length-{} columns", self.p)));
                        }
                        let flat: Vec<f64> = cols.iter().flatten().copied().collect();
                        Ok(DMatrix::from_column_slice(self.p, cols.len(), &flat))
                    })
                    .collect::<Result<Vec<_>>>()?;
                SubspaceModel::orthonormalize(&mats)
            }
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

/// Parses one float per line; blank lines and `#` comments are skipped.
pub fn parse_signal(text: &str) -> Result<DVector<f64>> {
    let vals = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(i, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: '{l}': {e}", i + 1)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DVector::from_vec(vals))
}

pub fn format_signal(x: &[f64]) -> String {
    let mut s = String::with_capacity(x.len() * 20);
    for v in x {
        s.push_str(&format!("{v:e}\n"));
    }
    s
}

pub fn read_signal(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    parse_signal(&std::fs::read_to_string(path)?)
}

pub fn write_signal(path: impl AsRef<Path>, x: &[f64]) -> Result<()> {
    std::fs::write(path, format_signal(x))?;
    Ok(())
}
