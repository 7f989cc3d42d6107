//! Splits, metrics, cross-validated grid search and result tables.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::efd::{features, EfdError, FeatureLayout, ORDER_GRID};
use crate::exec::Executor;
use crate::geometry::Geometry;
use crate::matrix::Matrix;
use crate::shallow::{
    self, FitOptions, Hyper, ModelKind, ShallowError, ShallowModel, Standardizer,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("dataset has {0} samples, at least 10 are needed")]
    TooSmall(usize),
    #[error("empty input")]
    Empty,
    #[error("{pred} predictions for {truth} labels")]
    Length { pred: usize, truth: usize },
    #[error("label {label} outside 0..{num_classes}")]
    LabelRange { label: usize, num_classes: usize },
    #[error("need at least 2 folds, got {0}")]
    Folds(usize),
    #[error("grid for {0} is empty")]
    EmptyGrid(&'static str),
    #[error("order {order} exceeds the feature table order {available}")]
    Order { order: usize, available: usize },
    #[error("feature extraction failed for geometry {id}: {source}")]
    Features { id: String, source: EfdError },
    #[error(transparent)]
    Shallow(#[from] ShallowError),
}

/// Train, validation and test indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

pub const MIN_TRAIN: usize = 10_000;
pub const MIN_HOLDOUT: usize = 1_000;

/// Validation and test sizes for `n` samples.
///
/// 80/10/10 by default. When the dataset can hold 10,000 training samples
/// plus 1,000 each for validation and test, the training set never drops
/// below 10,000 and the two holdouts share the remainder.
pub fn holdout_size(n: usize) -> usize {
    let tenth = n / 10;
    if n >= MIN_TRAIN + 2 * MIN_HOLDOUT && n - 2 * tenth < MIN_TRAIN {
        ((n - MIN_TRAIN) / 2).max(MIN_HOLDOUT)
    } else {
        tenth
    }
}

/// Seeded shuffle then partition. Not stratified.
pub fn split(n: usize, seed: u64) -> Result<Split, HarnessError> {
    if n < 10 {
        return Err(HarnessError::TooSmall(n));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let h = holdout_size(n);
    let test = idx.split_off(n - h);
    let val = idx.split_off(n - 2 * h);
    Ok(Split {
        seed,
        train: idx,
        val,
        test,
    })
}

/// Like [`split`], but every class is spread over the three parts in
/// proportion to its size (largest remainder), so the part sizes match
/// [`split`] and class shares match the whole dataset as closely as counts
/// allow.
pub fn split_stratified(labels: &[usize], seed: u64) -> Result<Split, HarnessError> {
    let n = labels.len();
    if n < 10 {
        return Err(HarnessError::TooSmall(n));
    }
    let k = labels.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = alloc::vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        members[y].push(i);
    }
    let h = holdout_size(n);
    let mut quota: Vec<usize> = members.iter().map(|m| m.len() * h / n).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&c| (core::cmp::Reverse((members[c].len() * h) % n), c));
    let mut short = h - quota.iter().sum::<usize>();
    while short > 0 {
        let before = short;
        for &c in &order {
            if short > 0 && 2 * (quota[c] + 1) <= members[c].len() {
                quota[c] += 1;
                short -= 1;
            }
        }
        if short == before {
            break;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (m, &q) in members.iter_mut().zip(&quota) {
        m.shuffle(&mut rng);
        test.extend_from_slice(&m[..q]);
        val.extend_from_slice(&m[q..2 * q]);
        train.extend_from_slice(&m[2 * q..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.shuffle(&mut rng);
    }
    Ok(Split {
        seed,
        train,
        val,
        test,
    })
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64, HarnessError> {
    if pred.len() != truth.len() {
        return Err(HarnessError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(HarnessError::Empty);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Most frequent training label; the lowest index wins ties.
pub fn majority_class(train: &[usize]) -> Option<usize> {
    let k = train.iter().copied().max()? + 1;
    let mut counts = alloc::vec![0usize; k];
    train.iter().for_each(|&l| counts[l] += 1);
    Some(shallow::majority(&counts))
}

/// Frequency of the training-majority class among the test labels.
pub fn majority_baseline(train: &[usize], test: &[usize]) -> Result<f64, HarnessError> {
    let m = majority_class(train).ok_or(HarnessError::Empty)?;
    if test.is_empty() {
        return Err(HarnessError::Empty);
    }
    Ok(test.iter().filter(|&&l| l == m).count() as f64 / test.len() as f64)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub num_classes: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.num_classes + pred]
    }

    pub fn row(&self, truth: usize) -> &[u64] {
        &self.counts[truth * self.num_classes..(truth + 1) * self.num_classes]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes).map(|i| self.get(i, i)).sum()
    }

    pub fn accuracy(&self) -> f64 {
        self.trace() as f64 / self.total() as f64
    }

    pub fn support(&self) -> Vec<u64> {
        (0..self.num_classes)
            .map(|i| self.row(i).iter().sum())
            .collect()
    }
}

pub fn confusion(
    pred: &[usize],
    truth: &[usize],
    num_classes: usize,
) -> Result<ConfusionMatrix, HarnessError> {
    if pred.len() != truth.len() {
        return Err(HarnessError::Length {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut counts = alloc::vec![0u64; num_classes * num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        for label in [p, t] {
            if label >= num_classes {
                return Err(HarnessError::LabelRange { label, num_classes });
            }
        }
        counts[t * num_classes + p] += 1;
    }
    Ok(ConfusionMatrix {
        num_classes,
        counts,
    })
}

/// Seeded k-fold partition of `0..n`: `folds` disjoint validation sets
/// covering every index once.
pub fn kfold(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, HarnessError> {
    if folds < 2 {
        return Err(HarnessError::Folds(folds));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = alloc::vec![Vec::new(); folds];
    for (i, v) in idx.into_iter().enumerate() {
        out[i % folds].push(v);
    }
    out.iter_mut().for_each(|f| f.sort_unstable());
    Ok(out)
}

/// Task-dependent search ranges for the shallow models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPreset {
    Neighbourhoods,
    Buildings,
    Archaeology,
}

impl TaskPreset {
    pub fn parse(s: &str) -> Option<TaskPreset> {
        match s {
            "neighbourhoods" => Some(TaskPreset::Neighbourhoods),
            "buildings" => Some(TaskPreset::Buildings),
            "archaeology" => Some(TaskPreset::Archaeology),
            _ => None,
        }
    }
}

fn powers_of_ten(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|e| 10f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub orders: Vec<usize>,
    pub knn_k: Vec<usize>,
    pub logreg_c: Vec<f64>,
    pub dtree_depth: Vec<usize>,
    pub svm_c: Vec<f64>,
    pub svm_gamma: Vec<f64>,
}

impl GridSpec {
    pub fn preset(task: TaskPreset) -> Self {
        let (depth, c_svm, gamma, c_lr) = match task {
            TaskPreset::Neighbourhoods => ((4, 9), (-2, 3), (-3, 3), (-3, 1)),
            TaskPreset::Buildings => ((6, 12), (-2, 3), (-2, 3), (-2, 3)),
            TaskPreset::Archaeology => ((5, 10), (-1, 3), (-4, 4), (-2, 3)),
        };
        Self {
            orders: ORDER_GRID.to_vec(),
            knn_k: (21..=30).collect(),
            logreg_c: powers_of_ten(c_lr.0, c_lr.1),
            dtree_depth: (depth.0..=depth.1).collect(),
            svm_c: powers_of_ten(c_svm.0, c_svm.1),
            svm_gamma: powers_of_ten(gamma.0, gamma.1),
        }
    }

    /// Hyperparameter combinations of one learner in listing order; for the
    /// SVM `C` varies slowest.
    pub fn hypers(&self, kind: ModelKind) -> Vec<Hyper> {
        match kind {
            ModelKind::Knn => self.knn_k.iter().map(|&k| Hyper::Knn { k }).collect(),
            ModelKind::Logreg => self.logreg_c.iter().map(|&c| Hyper::Logreg { c }).collect(),
            ModelKind::Dtree => self
                .dtree_depth
                .iter()
                .map(|&max_depth| Hyper::Dtree { max_depth })
                .collect(),
            ModelKind::SvmRbf => self
                .svm_c
                .iter()
                .flat_map(|&c| {
                    self.svm_gamma
                        .iter()
                        .map(move |&gamma| Hyper::SvmRbf { c, gamma })
                })
                .collect(),
        }
    }

    pub fn max_order(&self) -> usize {
        self.orders.iter().copied().max().unwrap_or(0)
    }
}

/// Feature vectors of a dataset at one order; lower orders are column
/// subsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    pub layout: FeatureLayout,
    pub matrix: Matrix,
}

impl FeatureTable {
    pub fn compute<E: Executor>(
        geoms: &[&Geometry],
        order: usize,
        exec: &E,
    ) -> Result<Self, HarnessError> {
        let layout = FeatureLayout::new(order);
        let rows = exec.map(geoms, |g| {
            features(g, order).map_err(|source| HarnessError::Features {
                id: g.id.clone(),
                source,
            })
        });
        let rows = rows
            .into_iter()
            .map(|r| r.map(|f| f.values))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self {
            layout,
            matrix: Matrix::from_rows(&rows, layout.len()),
        })
    }

    pub fn at_order(&self, order: usize) -> Result<Matrix, HarnessError> {
        if order > self.layout.order {
            return Err(HarnessError::Order {
                order,
                available: self.layout.order,
            });
        }
        Ok(self
            .matrix
            .select_cols(&FeatureLayout::new(order).columns_within(self.layout.order)))
    }

    pub fn select_rows(&self, idx: &[usize]) -> FeatureTable {
        Self {
            layout: self.layout,
            matrix: self.matrix.select_rows(idx),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub folds: usize,
    /// Maximum training rows used by the k-NN and SVM searches.
    pub subset_cap: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            subset_cap: 10_000,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvRow {
    pub order: usize,
    pub hyper: Hyper,
    pub fold_scores: Vec<f64>,
    pub mean: f64,
}

/// A shallow model together with the preprocessing it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedShallow {
    pub order: usize,
    pub hyper: Hyper,
    pub standardizer: Standardizer,
    pub model: ShallowModel,
}

impl FittedShallow {
    pub fn fit(
        table: &FeatureTable,
        labels: &[usize],
        order: usize,
        hyper: Hyper,
        opts: &FitOptions,
    ) -> Result<Self, HarnessError> {
        let x = table.at_order(order)?;
        let standardizer = Standardizer::fit(&x);
        let model = shallow::fit(hyper, &standardizer.transform(&x), labels, opts)?;
        Ok(Self {
            order,
            hyper,
            standardizer,
            model,
        })
    }

    pub fn predict(&self, table: &FeatureTable) -> Result<Vec<usize>, HarnessError> {
        let x = self.standardizer.transform(&table.at_order(self.order)?);
        Ok(self.model.predict(&x)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub kind: ModelKind,
    /// Rows ordered by ascending order, then hyperparameter listing order.
    pub table: Vec<CvRow>,
    pub best: usize,
    pub cv_rows_used: usize,
    pub fitted: FittedShallow,
}

impl GridResult {
    pub fn best_row(&self) -> &CvRow {
        &self.table[self.best]
    }
}

struct Fold {
    train: Vec<usize>,
    val: Vec<usize>,
}

fn fold_score(
    table: &FeatureTable,
    labels: &[usize],
    fold: &Fold,
    order: usize,
    hypers: &[Hyper],
    opts: &FitOptions,
) -> Result<Vec<f64>, HarnessError> {
    let x = table.at_order(order)?;
    let xt = x.select_rows(&fold.train);
    let st = Standardizer::fit(&xt);
    let xt = st.transform(&xt);
    let xv = st.transform(&x.select_rows(&fold.val));
    let yt: Vec<usize> = fold.train.iter().map(|&i| labels[i]).collect();
    let yv: Vec<usize> = fold.val.iter().map(|&i| labels[i]).collect();
    let deepest = hypers
        .iter()
        .try_fold(None, |acc: Option<usize>, h| match h {
            Hyper::Dtree { max_depth } => Ok(Some(acc.unwrap_or(0).max(*max_depth))),
            _ => Err(()),
        });
    if let Ok(Some(depth)) = deepest {
        // One tree at the largest depth answers every smaller depth.
        let tree = shallow::fit_dtree(&xt, &yt, depth)?;
        return hypers
            .iter()
            .map(|h| {
                let Hyper::Dtree { max_depth } = h else {
                    unreachable!()
                };
                let pred: Vec<usize> = xv
                    .iter_rows()
                    .map(|r| tree.predict_row_at_depth(r, *max_depth))
                    .collect();
                accuracy(&pred, &yv)
            })
            .collect();
    }
    let table = if hypers.len() > 1 && hypers.iter().all(|h| h.kind() == ModelKind::SvmRbf) {
        Some(shallow::SqDistances::new(&xt))
    } else {
        None
    };
    hypers
        .iter()
        .map(|&h| {
            let m = match (h, &table) {
                (Hyper::SvmRbf { c, gamma }, Some(t)) => ShallowModel::SvmRbf(
                    shallow::fit_svm_rbf_with_distances(&xt, &yt, t, c, gamma, &opts.svm)?,
                ),
                _ => shallow::fit(h, &xt, &yt, opts)?,
            };
            accuracy(&m.predict(&xv)?, &yv)
        })
        .collect()
}

/// Exhaustive search over `grid.orders × grid.hypers(kind)` with k-fold
/// cross validation, then a refit of the winner on every training row.
///
/// The best combination has the highest mean fold accuracy; ties go to the
/// smaller order, then to the earlier listed hyperparameters.
pub fn grid_search<E: Executor>(
    kind: ModelKind,
    table: &FeatureTable,
    labels: &[usize],
    grid: &GridSpec,
    opts: &GridOptions,
    exec: &E,
) -> Result<GridResult, HarnessError> {
    let hypers = grid.hypers(kind);
    let mut orders = grid.orders.clone();
    orders.sort_unstable();
    orders.dedup();
    if hypers.is_empty() || orders.is_empty() {
        return Err(HarnessError::EmptyGrid(kind.name()));
    }
    if labels.len() != table.matrix.rows() {
        return Err(HarnessError::Length {
            pred: table.matrix.rows(),
            truth: labels.len(),
        });
    }
    let mut rows: Vec<usize> = (0..labels.len()).collect();
    if matches!(kind, ModelKind::Knn | ModelKind::SvmRbf) && rows.len() > opts.subset_cap {
        rows.shuffle(&mut ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_5eed));
        rows.truncate(opts.subset_cap);
        rows.sort_unstable();
    }
    let folds: Vec<Fold> = kfold(rows.len(), opts.folds, opts.seed)?
        .into_iter()
        .map(|val| {
            let mut in_val = alloc::vec![false; rows.len()];
            val.iter().for_each(|&i| in_val[i] = true);
            Fold {
                train: (0..rows.len())
                    .filter(|&i| !in_val[i])
                    .map(|i| rows[i])
                    .collect(),
                val: val.into_iter().map(|i| rows[i]).collect(),
            }
        })
        .collect();
    // Trees share one fit per (order, fold) and SVMs one distance table;
    // other learners get a job per hyperparameter combination.
    let per_job: Vec<Vec<Hyper>> = if matches!(kind, ModelKind::Dtree | ModelKind::SvmRbf) {
        alloc::vec![hypers.clone()]
    } else {
        hypers.iter().map(|&h| alloc::vec![h]).collect()
    };
    let mut jobs = Vec::new();
    for &o in &orders {
        for (hi, _) in per_job.iter().enumerate() {
            for f in 0..folds.len() {
                jobs.push((o, hi, f));
            }
        }
    }
    let scores = exec.map(&jobs, |&(o, hi, f)| {
        fold_score(table, labels, &folds[f], o, &per_job[hi], &opts.fit)
    });
    let mut cv = Vec::with_capacity(orders.len() * hypers.len());
    let mut it = scores.into_iter();
    for &o in &orders {
        let mut block = alloc::vec![Vec::with_capacity(folds.len()); hypers.len()];
        for hs in &per_job {
            let base = hypers.iter().position(|h| *h == hs[0]).unwrap_or(0);
            for _ in 0..folds.len() {
                let s = it.next().ok_or(HarnessError::Empty)??;
                for (j, v) in s.into_iter().enumerate() {
                    block[base + j].push(v);
                }
            }
        }
        for (h, fold_scores) in hypers.iter().zip(block) {
            let mean = fold_scores.iter().sum::<f64>() / fold_scores.len() as f64;
            cv.push(CvRow {
                order: o,
                hyper: *h,
                fold_scores,
                mean,
            });
        }
    }
    let mut best = 0;
    for (i, r) in cv.iter().enumerate() {
        if r.mean > cv[best].mean {
            best = i;
        }
    }
    let fitted = FittedShallow::fit(table, labels, cv[best].order, cv[best].hyper, &opts.fit)?;
    Ok(GridResult {
        kind,
        table: cv,
        best,
        cv_rows_used: rows.len(),
        fitted,
    })
}

/// One cell of a comparison table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Score {
    Single(f64),
    MeanStd { mean: f64, std: f64 },
}

impl Score {
    pub fn mean(&self) -> f64 {
        match *self {
            Score::Single(v) => v,
            Score::MeanStd { mean, .. } => mean,
        }
    }

    /// Mean and population standard deviation.
    pub fn from_runs(values: &[f64]) -> Score {
        let n = values.len().max(1) as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Score::MeanStd {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn format(&self) -> String {
        match *self {
            Score::Single(v) => format!("{v:.3}"),
            Score::MeanStd { mean, std } => format!("{mean:.3} ± {std:.3}"),
        }
    }

    pub fn parse(s: &str) -> Option<Score> {
        let s = s.trim();
        if let Some((m, sd)) = s.split_once('±') {
            Some(Score::MeanStd {
                mean: m.trim().parse().ok()?,
                std: sd.trim().parse().ok()?,
            })
        } else {
            s.parse().ok().map(Score::Single)
        }
    }
}

pub const TABLE_ROWS: [&str; 7] = [
    "Majority class",
    "k-NN",
    "Logistic regression",
    "SVM RBF",
    "Decision tree",
    "CNN",
    "RNN",
];

/// Accuracy per model (rows) and task (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub tasks: Vec<String>,
    pub rows: Vec<(String, Vec<Option<Score>>)>,
}

impl ComparisonTable {
    /// Empty table with the seven standard rows.
    pub fn new(tasks: Vec<String>) -> Self {
        let rows = TABLE_ROWS
            .iter()
            .map(|r| (r.to_string(), alloc::vec![None; tasks.len()]))
            .collect();
        Self { tasks, rows }
    }

    pub fn set(&mut self, row: &str, task: &str, score: Score) -> bool {
        let Some(t) = self.tasks.iter().position(|x| x == task) else {
            return false;
        };
        match self.rows.iter_mut().find(|(r, _)| r == row) {
            Some((_, cells)) => {
                cells[t] = Some(score);
                true
            }
            None => false,
        }
    }

    pub fn get(&self, row: &str, task: &str) -> Option<Score> {
        let t = self.tasks.iter().position(|x| x == task)?;
        self.rows.iter().find(|(r, _)| r == row)?.1[t]
    }

    /// Header plus one record per row; missing cells are empty strings.
    pub fn records(&self) -> Vec<Vec<String>> {
        let mut out = Vec::with_capacity(self.rows.len() + 1);
        let mut header = alloc::vec!["Method".to_string()];
        header.extend(self.tasks.iter().cloned());
        out.push(header);
        for (name, cells) in &self.rows {
            let mut rec = alloc::vec![name.clone()];
            rec.extend(
                cells
                    .iter()
                    .map(|c| c.map(|s| s.format()).unwrap_or_default()),
            );
            out.push(rec);
        }
        out
    }

    pub fn from_records(records: &[Vec<String>]) -> Option<Self> {
        let (header, body) = records.split_first()?;
        let tasks: Vec<String> = header.get(1..)?.to_vec();
        let mut rows = Vec::with_capacity(body.len());
        for rec in body {
            let (name, cells) = rec.split_first()?;
            if cells.len() != tasks.len() {
                return None;
            }
            let cells = cells
                .iter()
                .map(|c| {
                    if c.is_empty() {
                        Some(None)
                    } else {
                        Score::parse(c).map(Some)
                    }
                })
                .collect::<Option<Vec<_>>>()?;
            rows.push((name.clone(), cells));
        }
        Some(Self { tasks, rows })
    }

    /// Left-aligned names, right-aligned scores, `-` for missing cells.
    pub fn render(&self) -> String {
        let recs = self.records();
        let cols = recs[0].len();
        let width: Vec<usize> = (0..cols)
            .map(|c| {
                recs.iter()
                    .map(|r| r[c].chars().count().max(1))
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        let mut out = String::new();
        for (i, r) in recs.iter().enumerate() {
            for (c, cell) in r.iter().enumerate() {
                let cell = if cell.is_empty() { "-" } else { cell.as_str() };
                let pad = width[c] - cell.chars().count();
                if c == 0 {
                    out.push_str(cell);
                    out.extend(core::iter::repeat_n(' ', pad));
                } else {
                    out.push_str("  ");
                    out.extend(core::iter::repeat_n(' ', pad));
                    out.push_str(cell);
                }
            }
            out.push('\n');
            if i == 0 {
                let total = width.iter().sum::<usize>() + 2 * (cols - 1);
                out.extend(core::iter::repeat_n('-', total));
                out.push('\n');
            }
        }
        out
    }
}
