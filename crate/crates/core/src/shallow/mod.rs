//! Shallow classifiers on fixed-length feature vectors.
//!
//! Inputs are [`Matrix`] rows (one sample per row) and class indices
//! `0..num_classes`. Features should go through a [`Standardizer`] fitted on
//! the training rows first; k-NN and the RBF kernel are both scale sensitive.

mod dtree;
mod knn;
mod logreg;
mod standardize;
mod svm;

pub use dtree::{fit_dtree, DecisionTree, TreeNode};
pub use knn::{fit_knn, Knn};
pub use logreg::{fit_logreg, LogReg, LogRegOptions};
pub use standardize::Standardizer;
pub use svm::{fit_svm_rbf, fit_svm_rbf_with_distances, BinarySvm, SqDistances, Svm, SvmOptions};

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShallowError {
    #[error("k = {k} must be between 1 and the number of training samples ({n})")]
    BadK { k: usize, n: usize },
    #[error("{0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("max depth must be at least 1")]
    ZeroDepth,
    #[error("training data is empty")]
    Empty,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("training data has a single class")]
    SingleClass,
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("model expects {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Knn,
    Logreg,
    Dtree,
    SvmRbf,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Knn,
        ModelKind::Logreg,
        ModelKind::SvmRbf,
        ModelKind::Dtree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Knn => "knn",
            ModelKind::Logreg => "logreg",
            ModelKind::Dtree => "dtree",
            ModelKind::SvmRbf => "svm_rbf",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Knn => "k-NN",
            ModelKind::Logreg => "Logistic regression",
            ModelKind::Dtree => "Decision tree",
            ModelKind::SvmRbf => "SVM RBF",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "knn" => Some(ModelKind::Knn),
            "logreg" => Some(ModelKind::Logreg),
            "dtree" => Some(ModelKind::Dtree),
            "svm" | "svm_rbf" => Some(ModelKind::SvmRbf),
            _ => None,
        }
    }
}

/// Hyperparameters of one learner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyper {
    Knn { k: usize },
    Logreg { c: f64 },
    Dtree { max_depth: usize },
    SvmRbf { c: f64, gamma: f64 },
}

impl Hyper {
    pub fn kind(&self) -> ModelKind {
        match self {
            Hyper::Knn { .. } => ModelKind::Knn,
            Hyper::Logreg { .. } => ModelKind::Logreg,
            Hyper::Dtree { .. } => ModelKind::Dtree,
            Hyper::SvmRbf { .. } => ModelKind::SvmRbf,
        }
    }
}

/// Solver limits that are not hyperparameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub logreg: LogRegOptions,
    pub svm: SvmOptions,
}

/// A trained shallow classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShallowModel {
    Knn(Knn),
    Logreg(LogReg),
    Dtree(DecisionTree),
    SvmRbf(Svm),
}

pub fn fit(
    hyper: Hyper,
    x: &Matrix,
    y: &[usize],
    opts: &FitOptions,
) -> Result<ShallowModel, ShallowError> {
    Ok(match hyper {
        Hyper::Knn { k } => ShallowModel::Knn(fit_knn(x, y, k)?),
        Hyper::Logreg { c } => ShallowModel::Logreg(fit_logreg(x, y, c, &opts.logreg)?),
        Hyper::Dtree { max_depth } => ShallowModel::Dtree(fit_dtree(x, y, max_depth)?),
        Hyper::SvmRbf { c, gamma } => ShallowModel::SvmRbf(fit_svm_rbf(x, y, c, gamma, &opts.svm)?),
    })
}

impl ShallowModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ShallowModel::Knn(_) => ModelKind::Knn,
            ShallowModel::Logreg(_) => ModelKind::Logreg,
            ShallowModel::Dtree(_) => ModelKind::Dtree,
            ShallowModel::SvmRbf(_) => ModelKind::SvmRbf,
        }
    }

    pub fn dims(&self) -> usize {
        match self {
            ShallowModel::Knn(m) => m.dims(),
            ShallowModel::Logreg(m) => m.dims(),
            ShallowModel::Dtree(m) => m.dims(),
            ShallowModel::SvmRbf(m) => m.dims(),
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            ShallowModel::Knn(m) => m.num_classes(),
            ShallowModel::Logreg(m) => m.num_classes(),
            ShallowModel::Dtree(m) => m.num_classes(),
            ShallowModel::SvmRbf(m) => m.num_classes(),
        }
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, ShallowError> {
        self.check_dims(x)?;
        Ok(match self {
            ShallowModel::Knn(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            ShallowModel::Logreg(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            ShallowModel::Dtree(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
            ShallowModel::SvmRbf(m) => x.iter_rows().map(|r| m.predict_row(r)).collect(),
        })
    }

    /// Per-class scores: class probabilities for logistic regression,
    /// aggregated one-vs-one decision values for the SVM, `None` otherwise.
    pub fn scores(&self, x: &Matrix) -> Result<Option<Matrix>, ShallowError> {
        self.check_dims(x)?;
        let rows: Vec<Vec<f64>> = match self {
            ShallowModel::Logreg(m) => x.iter_rows().map(|r| m.probabilities(r)).collect(),
            ShallowModel::SvmRbf(m) => x.iter_rows().map(|r| m.class_scores(r).1).collect(),
            _ => return Ok(None),
        };
        Ok(Some(Matrix::from_rows(&rows, self.num_classes())))
    }

    fn check_dims(&self, x: &Matrix) -> Result<(), ShallowError> {
        if x.rows() > 0 && x.cols() != self.dims() {
            return Err(ShallowError::Dimension {
                expected: self.dims(),
                got: x.cols(),
            });
        }
        Ok(())
    }
}

/// Shared argument validation; returns the number of classes.
pub(crate) fn check_training(x: &Matrix, y: &[usize]) -> Result<usize, ShallowError> {
    if x.rows() == 0 {
        return Err(ShallowError::Empty);
    }
    if x.rows() != y.len() {
        return Err(ShallowError::LabelCount {
            rows: x.rows(),
            labels: y.len(),
        });
    }
    for (i, r) in x.iter_rows().enumerate() {
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(ShallowError::NonFinite { row: i, col: j });
        }
    }
    Ok(y.iter().copied().max().unwrap_or(0) + 1)
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Most frequent label; the lowest class index wins ties.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
pub(crate) mod testdata {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Gaussian-ish blobs around well separated centres.
    pub fn blobs(
        per_class: usize,
        centres: &[[f64; 2]],
        spread: f64,
        seed: u64,
    ) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per_class {
                rows.push(alloc::vec![
                    centre[0] + rng.random_range(-spread..spread),
                    centre[1] + rng.random_range(-spread..spread),
                ]);
                labels.push(c);
            }
        }
        (Matrix::from_rows(&rows, 2), labels)
    }

    pub fn random(rows: usize, cols: usize, classes: usize, seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let labels = (0..rows).map(|_| rng.random_range(0..classes)).collect();
        (Matrix::new(rows, cols, data), labels)
    }
}
