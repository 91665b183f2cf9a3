//! Head-to-head pair models and single-source models.

use std::cmp::Ordering;

use sha2::{Digest, Sha256};

use super::svm::{LinearModel, SvmParams};
use super::{per_molecule_error, FeatureMatrix, FusionError};
use crate::chem::{SplitAssignment, SplitKind};
use crate::num::Scalar;
use crate::store::{ArenaInputs, EmbeddingMatrix};

#[derive(Debug, Clone, PartialEq)]
pub struct MoleculeErrors<T> {
    pub molecule_id: String,
    pub error_i: T,
    pub error_j: T,
}

/// Per-test-molecule errors of both captioners under one shared pair model.
#[derive(Debug, Clone, PartialEq)]
pub struct PairErrorTable<T> {
    pub pair: (String, String),
    /// Test molecules in manifest order.
    pub rows: Vec<MoleculeErrors<T>>,
}

impl<T> PairErrorTable<T> {
    pub fn get(&self, molecule_id: &str) -> Option<&MoleculeErrors<T>> {
        self.rows.iter().find(|r| r.molecule_id == molecule_id)
    }
}

/// Test-split scores of a model trained on one captioner's rows alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScores<T> {
    pub captioner: String,
    pub molecule_ids: Vec<String>,
    pub scores: Vec<T>,
    pub labels: Vec<T>,
}

/// Seed of a pair model, independent of the order the pair is named in.
pub fn pair_seed(dataset: &str, fold: usize, a: &str, b: &str, seed_base: u64) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let mut h = Sha256::new();
    for part in [dataset.as_bytes(), lo.as_bytes(), hi.as_bytes()] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.update((fold as u64).to_le_bytes());
    h.update(seed_base.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

fn caption_matrix<'a>(
    inputs: &'a ArenaInputs,
    name: &str,
) -> Result<&'a EmbeddingMatrix, FusionError> {
    inputs
        .caption_embeddings(name)
        .ok_or_else(|| FusionError::UnknownCaptioner(name.to_string()))
}

fn feature_row<T: Scalar>(
    caption: &EmbeddingMatrix,
    molecule: &EmbeddingMatrix,
    i: usize,
) -> Vec<T> {
    caption
        .row(i)
        .iter()
        .chain(molecule.row(i))
        .map(|&v| T::of_f32(v))
        .collect()
}

fn split_members(
    inputs: &ArenaInputs,
    split: &SplitAssignment,
) -> Result<(Vec<usize>, Vec<usize>), FusionError> {
    let manifest = inputs.manifest();
    if let Some(m) = manifest
        .molecules
        .iter()
        .find(|m| !split.assignment.contains_key(&m.id))
    {
        return Err(FusionError::UnassignedMolecule(m.id.clone()));
    }
    let pref = split.members(manifest, SplitKind::Preference);
    let test = split.members(manifest, SplitKind::Test);
    if pref.is_empty() {
        return Err(FusionError::EmptySplit(SplitKind::Preference));
    }
    if test.is_empty() {
        return Err(FusionError::EmptySplit(SplitKind::Test));
    }
    Ok((pref, test))
}

fn lexicographic(a: &[f32], b: &[f32]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Train the pair model `M_{i,j}` on the preference split and score both
/// captioners on every test molecule.
///
/// Each preference molecule contributes two rows sharing its molecule
/// embedding and label. The two rows are ordered by caption content, so the
/// training set does not depend on which captioner is named first.
pub fn head_to_head<T: Scalar>(
    pair: (&str, &str),
    inputs: &ArenaInputs,
    split: &SplitAssignment,
    hp: SvmParams<T>,
    seed_base: u64,
) -> Result<PairErrorTable<T>, FusionError> {
    let cap_i = caption_matrix(inputs, pair.0)?;
    let cap_j = caption_matrix(inputs, pair.1)?;
    let mol = inputs.molecule_embeddings();
    let manifest = inputs.manifest();
    let (pref, test) = split_members(inputs, split)?;

    let mut x = FeatureMatrix::with_dim(cap_i.dim() + mol.dim());
    let mut y = Vec::with_capacity(2 * pref.len());
    for &m in &pref {
        let (first, second) = match lexicographic(cap_i.row(m), cap_j.row(m)) {
            Ordering::Greater => (cap_j, cap_i),
            _ => (cap_i, cap_j),
        };
        let label = T::of(manifest.molecules[m].label);
        x.push_row(feature_row(first, mol, m));
        x.push_row(feature_row(second, mol, m));
        y.extend([label, label]);
    }

    let seed = pair_seed(&manifest.dataset, split.fold, pair.0, pair.1, seed_base);
    let model = LinearModel::fit(manifest.task, &x, &y, hp.with_seed(seed))?;

    let rows = test
        .into_iter()
        .map(|m| {
            let label = T::of(manifest.molecules[m].label);
            let si = model.predict(&feature_row(cap_i, mol, m))?;
            let sj = model.predict(&feature_row(cap_j, mol, m))?;
            Ok(MoleculeErrors {
                molecule_id: manifest.molecules[m].id.clone(),
                error_i: per_molecule_error(manifest.task, si, label),
                error_j: per_molecule_error(manifest.task, sj, label),
            })
        })
        .collect::<Result<_, FusionError>>()?;
    Ok(PairErrorTable {
        pair: (pair.0.to_string(), pair.1.to_string()),
        rows,
    })
}

/// Model trained on one captioner's preference rows, scored on the test split.
pub fn single_source<T: Scalar>(
    captioner: &str,
    inputs: &ArenaInputs,
    split: &SplitAssignment,
    hp: SvmParams<T>,
    seed_base: u64,
) -> Result<SourceScores<T>, FusionError> {
    let cap = caption_matrix(inputs, captioner)?;
    let mol = inputs.molecule_embeddings();
    let manifest = inputs.manifest();
    let (pref, test) = split_members(inputs, split)?;

    let mut x = FeatureMatrix::with_dim(cap.dim() + mol.dim());
    let mut y = Vec::with_capacity(pref.len());
    for &m in &pref {
        x.push_row(feature_row(cap, mol, m));
        y.push(T::of(manifest.molecules[m].label));
    }
    let seed = pair_seed(
        &manifest.dataset,
        split.fold,
        captioner,
        captioner,
        seed_base,
    );
    let model = LinearModel::fit(manifest.task, &x, &y, hp.with_seed(seed))?;

    let mut out = SourceScores {
        captioner: captioner.to_string(),
        molecule_ids: Vec::with_capacity(test.len()),
        scores: Vec::with_capacity(test.len()),
        labels: Vec::with_capacity(test.len()),
    };
    for m in test {
        out.molecule_ids.push(manifest.molecules[m].id.clone());
        out.scores.push(model.predict(&feature_row(cap, mol, m))?);
        out.labels.push(T::of(manifest.molecules[m].label));
    }
    Ok(out)
}
