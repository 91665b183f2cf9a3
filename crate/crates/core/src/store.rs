//! On-disk data model: dataset manifests, captioner metadata and `EMB1`
//! embedding matrices.
//!
//! An embedding file is the 4 ASCII bytes `EMB1`, the row count and the
//! dimension as little-endian `u32`, then `rows * dim` little-endian `f32`
//! values in row-major order. Rows follow the manifest's molecule order.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EMB_MAGIC: &[u8; 4] = b"EMB1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    BinaryClassification,
    Regression,
}

impl std::fmt::Display for TaskKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TaskKind::BinaryClassification => "binary_classification",
            TaskKind::Regression => "regression",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Molecule {
    pub id: String,
    pub smiles: String,
    pub label: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Smiles,
    Fragments,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionerMeta {
    pub name: String,
    pub model_family: String,
    pub prompt_variant: String,
    pub representation: Representation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub dataset: String,
    pub task: TaskKind,
    pub molecules: Vec<Molecule>,
    pub captioners: Vec<CaptionerMeta>,
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed manifest JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("duplicate molecule id {0:?}")]
    DuplicateMoleculeId(String),
    #[error("duplicate captioner name {0:?}")]
    DuplicateCaptioner(String),
    #[error("label of molecule {id:?} is invalid for a {task} task")]
    BadLabel { task: TaskKind, id: String },
    #[error("embedding file does not start with EMB1")]
    BadMagic,
    #[error("embedding file is truncated or has trailing bytes: expected {expected} bytes, found {found}")]
    BadLength { expected: usize, found: usize },
    #[error("embedding row count {found} does not match expected {expected}")]
    RowCountMismatch { found: usize, expected: usize },
    #[error("non-finite embedding value at row {row}, column {col}")]
    NonFiniteValue { row: usize, col: usize },
    #[error("no caption embeddings supplied for captioner {0:?}")]
    MissingCaptionerEmbedding(String),
    #[error("caption embeddings supplied for unknown captioner {0:?}")]
    UnknownCaptioner(String),
    #[error("embedding dimension mismatch: {0}")]
    DimMismatch(String),
}

impl DatasetManifest {
    /// Check id uniqueness, captioner uniqueness and label domain.
    pub fn validate(&self) -> Result<(), StoreError> {
        let mut ids = HashSet::new();
        for m in &self.molecules {
            if !ids.insert(m.id.as_str()) {
                return Err(StoreError::DuplicateMoleculeId(m.id.clone()));
            }
            let ok = match self.task {
                TaskKind::BinaryClassification => m.label == 0.0 || m.label == 1.0,
                TaskKind::Regression => m.label.is_finite(),
            };
            if !ok {
                return Err(StoreError::BadLabel {
                    task: self.task,
                    id: m.id.clone(),
                });
            }
        }
        let mut names = HashSet::new();
        for c in &self.captioners {
            if !names.insert(c.name.as_str()) {
                return Err(StoreError::DuplicateCaptioner(c.name.clone()));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let manifest: DatasetManifest = serde_json::from_str(text)?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn captioner(&self, name: &str) -> Option<&CaptionerMeta> {
        self.captioners.iter().find(|c| c.name == name)
    }

    pub fn labels(&self) -> Vec<f64> {
        self.molecules.iter().map(|m| m.label).collect()
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, StoreError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    DatasetManifest::from_json(&text)
}

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    values: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f32>) -> Result<Self, StoreError> {
        if values.len() != rows * dim {
            return Err(StoreError::DimMismatch(format!(
                "{} values for a {rows}x{dim} matrix",
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(StoreError::NonFiniteValue {
                row: k / dim,
                col: k % dim,
            });
        }
        Ok(EmbeddingMatrix { rows, dim, values })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        EmbeddingMatrix {
            rows,
            dim,
            values: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.values.len());
        out.extend_from_slice(EMB_MAGIC);
        out.extend_from_slice(&(self.rows as u32).to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], expected_rows: usize) -> Result<Self, StoreError> {
        if bytes.len() < 12 || &bytes[..4] != EMB_MAGIC {
            return Err(StoreError::BadMagic);
        }
        let word =
            |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().expect("4 bytes")) as usize;
        let rows = word(4);
        let dim = word(8);
        if rows != expected_rows {
            return Err(StoreError::RowCountMismatch {
                found: rows,
                expected: expected_rows,
            });
        }
        let expected = rows
            .checked_mul(dim)
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(12))
            .unwrap_or(usize::MAX);
        if bytes.len() != expected {
            return Err(StoreError::BadLength {
                expected,
                found: bytes.len(),
            });
        }
        let values = bytes[12..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        EmbeddingMatrix::new(rows, dim, values)
    }
}

pub fn load_embeddings(
    path: impl AsRef<Path>,
    expected_rows: usize,
) -> Result<EmbeddingMatrix, StoreError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    EmbeddingMatrix::from_bytes(&bytes, expected_rows)
}

pub fn write_embeddings(
    matrix: &EmbeddingMatrix,
    path: impl AsRef<Path>,
) -> Result<(), StoreError> {
    let path = path.as_ref();
    let io_err = |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut file = fs::File::create(path).map_err(io_err)?;
    file.write_all(&matrix.to_bytes()).map_err(io_err)?;
    file.flush().map_err(io_err)
}

/// Validated inputs for one dataset's arena.
#[derive(Debug, Clone)]
pub struct ArenaInputs {
    manifest: DatasetManifest,
    molecule_embeddings: EmbeddingMatrix,
    caption_embeddings: BTreeMap<String, EmbeddingMatrix>,
}

impl ArenaInputs {
    pub fn manifest(&self) -> &DatasetManifest {
        &self.manifest
    }

    pub fn molecule_embeddings(&self) -> &EmbeddingMatrix {
        &self.molecule_embeddings
    }

    pub fn caption_embeddings(&self, captioner: &str) -> Option<&EmbeddingMatrix> {
        self.caption_embeddings.get(captioner)
    }

    /// Captioner names in manifest order.
    pub fn captioners(&self) -> Vec<&str> {
        self.manifest
            .captioners
            .iter()
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn caption_dim(&self) -> usize {
        self.caption_embeddings
            .values()
            .next()
            .map_or(0, EmbeddingMatrix::dim)
    }
}

/// Bind embeddings to a manifest, refusing any captioner mismatch.
pub fn align(
    manifest: DatasetManifest,
    molecule_embeddings: EmbeddingMatrix,
    caption_embeddings: BTreeMap<String, EmbeddingMatrix>,
) -> Result<ArenaInputs, StoreError> {
    manifest.validate()?;
    let n = manifest.molecules.len();
    if molecule_embeddings.rows() != n {
        return Err(StoreError::RowCountMismatch {
            found: molecule_embeddings.rows(),
            expected: n,
        });
    }
    for c in &manifest.captioners {
        if !caption_embeddings.contains_key(&c.name) {
            return Err(StoreError::MissingCaptionerEmbedding(c.name.clone()));
        }
    }
    let mut dim = None;
    for (name, m) in &caption_embeddings {
        if manifest.captioner(name).is_none() {
            return Err(StoreError::UnknownCaptioner(name.clone()));
        }
        if m.rows() != n {
            return Err(StoreError::RowCountMismatch {
                found: m.rows(),
                expected: n,
            });
        }
        match dim {
            None => dim = Some(m.dim()),
            Some(d) if d != m.dim() => {
                return Err(StoreError::DimMismatch(format!(
                    "captioner {name:?} has dimension {} but others have {d}",
                    m.dim()
                )))
            }
            _ => {}
        }
    }
    Ok(ArenaInputs {
        manifest,
        molecule_embeddings,
        caption_embeddings,
    })
}
