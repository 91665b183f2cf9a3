//! Late-fusion property models: caption embedding ⊕ molecule embedding fed to
//! a linear SVM trained on the preference split.

pub mod pair;
pub mod standardize;
pub mod svm;

use thiserror::Error;

use crate::chem::SplitKind;
use crate::num::{sigmoid, Scalar};
use crate::store::TaskKind;

pub use pair::{
    head_to_head, pair_seed, single_source, MoleculeErrors, PairErrorTable, SourceScores,
};
pub use standardize::Standardizer;
pub use svm::{
    predict, train_classifier, train_classifier_traced, train_regressor, train_regressor_traced,
    LinearModel, SolverTrace, SvmParams,
};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("no training rows")]
    EmptyInput,
    #[error("classification training data contains a single class")]
    SingleClassInput,
    #[error("non-finite feature at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("non-finite label at row {row}")]
    NonFiniteLabel { row: usize },
    #[error("label at row {row} is not 0 or 1")]
    NotBinaryLabel { row: usize },
    #[error("feature length {found} does not match model dimension {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("{rows} feature rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("need at least {needed} training rows, found {found}")]
    TooFewExamples { needed: usize, found: usize },
    #[error("SVM hyperparameters must satisfy C > 0, epsilon >= 0, tol > 0, max_epochs > 0")]
    BadHyperparameters,
    #[error("{0} split is empty")]
    EmptySplit(SplitKind),
    #[error("captioner {0:?} is not part of the arena inputs")]
    UnknownCaptioner(String),
    #[error("split assignment does not cover molecule {0:?}")]
    UnassignedMolecule(String),
}

/// Dense row-major feature rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(rows: usize, dim: usize, data: Vec<T>) -> Result<Self, FusionError> {
        if data.len() != rows * dim {
            return Err(FusionError::DimMismatch {
                expected: rows * dim,
                found: data.len(),
            });
        }
        Ok(FeatureMatrix { rows, dim, data })
    }

    pub fn with_dim(dim: usize) -> Self {
        FeatureMatrix {
            rows: 0,
            dim,
            data: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: impl IntoIterator<Item = T>) {
        let before = self.data.len();
        self.data.extend(row);
        assert_eq!(
            self.data.len() - before,
            self.dim,
            "row length must equal dim"
        );
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        // chunks_exact(0) panics; a zero-width matrix still has `rows` empty rows
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn check_finite(&self) -> Result<(), FusionError> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(k) => Err(FusionError::NonFiniteFeature {
                row: k / self.dim.max(1),
                col: k % self.dim.max(1),
            }),
            None => Ok(()),
        }
    }
}

/// Battle error of one prediction: `|σ(score) − label|` for classification,
/// `|score − label|` for regression.
pub fn per_molecule_error<T: Scalar>(task: TaskKind, score: T, label: T) -> T {
    match task {
        TaskKind::BinaryClassification => (sigmoid(score) - label).abs(),
        TaskKind::Regression => (score - label).abs(),
    }
}
