//! Scaffold-disjoint train/preference/valid/test splits.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::canon::{canonical_form, ScaffoldKey};
use super::scaffold::murcko_scaffold;
use super::smiles::{parse_smiles, SmilesError};
use crate::store::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitKind {
    Train,
    Preference,
    Valid,
    Test,
}

impl SplitKind {
    pub const ALL: [SplitKind; 4] = [
        SplitKind::Train,
        SplitKind::Preference,
        SplitKind::Valid,
        SplitKind::Test,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SplitKind::Train => "train",
            SplitKind::Preference => "preference",
            SplitKind::Valid => "valid",
            SplitKind::Test => "test",
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Split membership of every molecule for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub fold: usize,
    pub assignment: BTreeMap<String, SplitKind>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    /// Molecule ids of `kind`, in the order they appear in `manifest`.
    pub fn members(&self, manifest: &DatasetManifest, kind: SplitKind) -> Vec<usize> {
        manifest
            .molecules
            .iter()
            .enumerate()
            .filter(|(_, m)| self.assignment.get(&m.id) == Some(&kind))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn sizes(&self) -> [usize; 4] {
        let mut out = [0; 4];
        for kind in self.assignment.values() {
            out[*kind as usize] += 1;
        }
        out
    }
}

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("manifest has no molecules")]
    EmptyManifest,
    #[error("split ratios must be non-negative and sum to 1, got {0:?}")]
    BadRatios([f64; 4]),
    #[error("at least one fold is required")]
    NoFolds,
    #[error("molecule {id:?}: {source}")]
    Smiles {
        id: String,
        #[source]
        source: SmilesError,
    },
}

pub fn validate_ratios(ratios: [f64; 4]) -> Result<(), SplitError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(SplitError::BadRatios(ratios));
    }
    Ok(())
}

/// Scaffold key of every manifest molecule, in manifest order.
pub fn scaffold_keys(manifest: &DatasetManifest) -> Result<Vec<ScaffoldKey>, SplitError> {
    manifest
        .molecules
        .iter()
        .map(|m| {
            let mol = parse_smiles(&m.smiles).map_err(|source| SplitError::Smiles {
                id: m.id.clone(),
                source,
            })?;
            Ok(canonical_form(&murcko_scaffold(&mol)))
        })
        .collect()
}

/// Greedy deficit assignment: each group, in the given order, goes to the split
/// whose expected count minus current count is largest. Ties go to the earlier
/// split in train, preference, valid, test order.
pub fn assign_groups(group_sizes: &[usize], ratios: [f64; 4]) -> Vec<SplitKind> {
    let total: usize = group_sizes.iter().sum();
    let expected = ratios.map(|r| r * total as f64);
    let mut counts = [0usize; 4];
    group_sizes
        .iter()
        .map(|&size| {
            let mut best = 0;
            let mut best_deficit = f64::NEG_INFINITY;
            for (k, &e) in expected.iter().enumerate() {
                let deficit = e - counts[k] as f64;
                if deficit > best_deficit + 1e-9 {
                    best = k;
                    best_deficit = deficit;
                }
            }
            counts[best] += size;
            SplitKind::ALL[best]
        })
        .collect()
}

/// Build one scaffold-disjoint split per fold. Fold `f` shuffles scaffold
/// groups with seed `base_seed + f` before the stable size-descending sort.
pub fn scaffold_split(
    manifest: &DatasetManifest,
    ratios: [f64; 4],
    base_seed: u64,
    folds: usize,
) -> Result<Vec<SplitAssignment>, SplitError> {
    if manifest.molecules.is_empty() {
        return Err(SplitError::EmptyManifest);
    }
    validate_ratios(ratios)?;
    if folds == 0 {
        return Err(SplitError::NoFolds);
    }
    let keys = scaffold_keys(manifest)?;
    let mut groups: BTreeMap<&ScaffoldKey, Vec<usize>> = BTreeMap::new();
    for (i, key) in keys.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();

    Ok((0..folds)
        .map(|fold| {
            let mut order: Vec<&Vec<usize>> = groups.iter().collect();
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(fold as u64));
            order.shuffle(&mut rng);
            order.sort_by_key(|g| std::cmp::Reverse(g.len()));
            let sizes: Vec<usize> = order.iter().map(|g| g.len()).collect();
            let kinds = assign_groups(&sizes, ratios);
            let mut assignment = BTreeMap::new();
            for (group, kind) in order.iter().zip(kinds) {
                for &i in group.iter() {
                    assignment.insert(manifest.molecules[i].id.clone(), kind);
                }
            }
            let mut split = SplitAssignment {
                fold,
                assignment,
                warnings: Vec::new(),
            };
            let sizes = split.sizes();
            for kind in SplitKind::ALL {
                if sizes[kind as usize] == 0 {
                    split.warnings.push(format!(
                        "dataset {}: fold {fold}: {kind} split is empty",
                        manifest.dataset
                    ));
                }
            }
            split
        })
        .collect())
}

/// Serialize all folds as the JSON array written to split files.
pub fn splits_to_json(splits: &[SplitAssignment]) -> String {
    let mut s = serde_json::to_string_pretty(splits).expect("splits serialize");
    s.push('\n');
    s
}
