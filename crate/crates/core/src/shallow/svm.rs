use alloc::collections::VecDeque;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_training, ShallowError};
use crate::matrix::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    /// SMO iteration cap per binary subproblem.
    pub max_iter: usize,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Kernel row cache budget in bytes.
    pub cache_bytes: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            max_iter: 10_000_000,
            tol: 1e-3,
            cache_bytes: 256 << 20,
        }
    }
}

/// One binary RBF machine: `f(x) = Σ coef_i K(sv_i, x) - rho`.
/// Positive values vote for `positive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub positive: usize,
    pub negative: usize,
    /// Rows of [`Svm::vectors`].
    pub support: Vec<usize>,
    pub coef: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// RBF support vector classifier, one-vs-one for more than two classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub c: f64,
    pub gamma: f64,
    /// Support vectors of all machines, each stored once.
    pub vectors: Matrix,
    pub machines: Vec<BinarySvm>,
    dims: usize,
    num_classes: usize,
}

fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    (-gamma * squared_distance(a, b)).exp()
}

/// Pairwise squared Euclidean distances between the rows of a matrix.
///
/// The RBF kernel only depends on these, so one table serves every `gamma`
/// of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct SqDistances {
    n: usize,
    data: Vec<f64>,
}

impl SqDistances {
    pub fn new(x: &Matrix) -> Self {
        let n = x.rows();
        let mut data = alloc::vec![0.0; n * n];
        for i in 0..n {
            for j in i + 1..n {
                let d = squared_distance(x.row(i), x.row(j));
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

enum Source<'a> {
    Points(&'a Matrix),
    /// Distance table plus the table index of every local row.
    Table(&'a SqDistances, Vec<usize>),
}

struct KernelCache<'a> {
    source: Source<'a>,
    gamma: f64,
    rows: Vec<Option<Vec<f64>>>,
    order: VecDeque<usize>,
    capacity: usize,
}

impl<'a> KernelCache<'a> {
    fn new(source: Source<'a>, n: usize, gamma: f64, bytes: usize) -> Self {
        let capacity = (bytes / (8 * n.max(1))).clamp(2, n.max(2));
        Self {
            source,
            gamma,
            rows: alloc::vec![None; n],
            order: VecDeque::new(),
            capacity,
        }
    }

    fn ensure(&mut self, i: usize, keep: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.order.len() >= self.capacity {
            if self.order.front() == Some(&keep) {
                self.order.rotate_left(1);
            }
            if let Some(old) = self.order.pop_front() {
                self.rows[old] = None;
            }
        }
        let row = match &self.source {
            Source::Points(x) => {
                let xi = x.row(i);
                x.iter_rows().map(|r| rbf(self.gamma, xi, r)).collect()
            }
            Source::Table(t, idx) => {
                let base = idx[i] * t.n;
                idx.iter()
                    .map(|&j| (-self.gamma * t.data[base + j]).exp())
                    .collect()
            }
        };
        self.rows[i] = Some(row);
        self.order.push_back(i);
    }

    fn pair(&mut self, i: usize, j: usize) -> (&[f64], &[f64]) {
        self.ensure(i, i);
        self.ensure(j, i);
        (
            self.rows[i].as_deref().unwrap_or(&[]),
            self.rows[j].as_deref().unwrap_or(&[]),
        )
    }
}

/// Solves the C-SVM dual for labels `y ∈ {+1, -1}` by SMO with the
/// maximal violating pair. Returns `(alpha, rho, iterations, converged)`.
fn smo(
    source: Source<'_>,
    y: &[f64],
    c: f64,
    gamma: f64,
    opts: &SvmOptions,
) -> (Vec<f64>, f64, usize, bool) {
    let n = y.len();
    let mut alpha = alloc::vec![0.0; n];
    // Gradient of ½αᵀQα − eᵀα.
    let mut g = alloc::vec![-1.0; n];
    let mut cache = KernelCache::new(source, n, gamma, opts.cache_bytes);
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iterations = 0;
    let mut converged = false;
    loop {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * g[t];
            if up(alpha[t], y[t]) && v > gmax {
                gmax = v;
                i = t;
            }
            if low(alpha[t], y[t]) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < opts.tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        iterations += 1;
        let (ki, kj) = cache.pair(i, j);
        let (yi, yj) = (y[i], y[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = ki[j];
        let (mut ai, mut aj) = (old_i, old_j);
        if yi != yj {
            let quad = (2.0 + 2.0 * kij).max(1e-12);
            let delta = (-g[i] - g[j]) / quad;
            let diff = ai - aj;
            ai += delta;
            aj += delta;
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
        } else {
            let quad = (2.0 - 2.0 * kij).max(1e-12);
            let delta = (g[i] - g[j]) / quad;
            let sum = ai + aj;
            ai -= delta;
            aj += delta;
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
        }
        let (di, dj) = (ai - old_i, aj - old_j);
        alpha[i] = ai;
        alpha[j] = aj;
        for t in 0..n {
            g[t] += y[t] * (yi * ki[t] * di + yj * kj[t] * dj);
        }
    }
    // Offset from free vectors, else the midpoint of the feasible interval.
    let (mut sum, mut free) = (0.0, 0usize);
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += yg;
            free += 1;
        } else if (alpha[t] >= c && y[t] < 0.0) || (alpha[t] <= 0.0 && y[t] > 0.0) {
            ub = ub.min(yg);
        } else {
            lb = lb.max(yg);
        }
    }
    let rho = if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        (ub + lb) / 2.0
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    };
    (alpha, rho, iterations, converged)
}

#[allow(clippy::too_many_arguments)]
fn fit_binary(
    x: &Matrix,
    labels: &[usize],
    table: Option<&SqDistances>,
    pos: usize,
    neg: usize,
    c: f64,
    gamma: f64,
    opts: &SvmOptions,
) -> BinarySvm {
    let idx: Vec<usize> = (0..labels.len())
        .filter(|&i| labels[i] == pos || labels[i] == neg)
        .collect();
    let y: Vec<f64> = idx
        .iter()
        .map(|&i| if labels[i] == pos { 1.0 } else { -1.0 })
        .collect();
    let sub;
    let source = match table {
        Some(t) => Source::Table(t, idx.clone()),
        None => {
            sub = x.select_rows(&idx);
            Source::Points(&sub)
        }
    };
    let (alpha, rho, iterations, converged) = smo(source, &y, c, gamma, opts);
    let sv: Vec<usize> = (0..alpha.len()).filter(|&t| alpha[t] > 0.0).collect();
    // Training row indices for now; remapped once all machines exist.
    BinarySvm {
        positive: pos,
        negative: neg,
        support: sv.iter().map(|&t| idx[t]).collect(),
        coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        rho,
        iterations,
        converged,
    }
}

pub fn fit_svm_rbf(
    x: &Matrix,
    y: &[usize],
    c: f64,
    gamma: f64,
    opts: &SvmOptions,
) -> Result<Svm, ShallowError> {
    fit_svm_inner(x, y, None, c, gamma, opts)
}

/// Same model as [`fit_svm_rbf`], reading kernel values from distances
/// precomputed for the rows of `x`.
pub fn fit_svm_rbf_with_distances(
    x: &Matrix,
    y: &[usize],
    table: &SqDistances,
    c: f64,
    gamma: f64,
    opts: &SvmOptions,
) -> Result<Svm, ShallowError> {
    if table.len() != x.rows() {
        return Err(ShallowError::LabelCount {
            rows: table.len(),
            labels: x.rows(),
        });
    }
    fit_svm_inner(x, y, Some(table), c, gamma, opts)
}

fn fit_svm_inner(
    x: &Matrix,
    y: &[usize],
    table: Option<&SqDistances>,
    c: f64,
    gamma: f64,
    opts: &SvmOptions,
) -> Result<Svm, ShallowError> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(ShallowError::NonPositive("C"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(ShallowError::NonPositive("gamma"));
    }
    let k = check_training(x, y)?;
    let mut present = alloc::vec![false; k];
    y.iter().for_each(|&l| present[l] = true);
    let classes: Vec<usize> = (0..k).filter(|&c| present[c]).collect();
    if classes.len() < 2 {
        return Err(ShallowError::SingleClass);
    }
    let mut machines = Vec::new();
    for (a, &pos) in classes.iter().enumerate() {
        for &neg in &classes[a + 1..] {
            machines.push(fit_binary(x, y, table, pos, neg, c, gamma, opts));
        }
    }
    let mut used: Vec<usize> = machines
        .iter()
        .flat_map(|m| m.support.iter().copied())
        .collect();
    used.sort_unstable();
    used.dedup();
    for m in &mut machines {
        for s in &mut m.support {
            *s = used.binary_search(s).unwrap_or(0);
        }
    }
    Ok(Svm {
        c,
        gamma,
        vectors: x.select_rows(&used),
        machines,
        dims: x.cols(),
        num_classes: k,
    })
}

impl BinarySvm {
    /// Decision value given `K(v, x)` for every row `v` of [`Svm::vectors`].
    pub fn decision(&self, kernel: &[f64]) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&s, a)| a * kernel[s])
            .sum::<f64>()
            - self.rho
    }
}

impl Svm {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn converged(&self) -> bool {
        self.machines.iter().all(|m| m.converged)
    }

    /// Distinct support vectors over all machines.
    pub fn support_count(&self) -> usize {
        self.vectors.rows()
    }

    pub fn kernel_row(&self, row: &[f64]) -> Vec<f64> {
        self.vectors
            .iter_rows()
            .map(|v| rbf(self.gamma, v, row))
            .collect()
    }

    pub fn decision(&self, machine: usize, row: &[f64]) -> f64 {
        self.machines[machine].decision(&self.kernel_row(row))
    }

    /// One-vs-one vote counts and aggregated decision values per class.
    pub fn class_scores(&self, row: &[f64]) -> (Vec<usize>, Vec<f64>) {
        let mut votes = alloc::vec![0usize; self.num_classes];
        let mut score = alloc::vec![0.0; self.num_classes];
        let kernel = self.kernel_row(row);
        for m in &self.machines {
            let f = m.decision(&kernel);
            if f > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
            score[m.positive] += f;
            score[m.negative] -= f;
        }
        (votes, score)
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        let (votes, score) = self.class_scores(row);
        let present: Vec<usize> = (0..self.num_classes)
            .filter(|&c| {
                self.machines
                    .iter()
                    .any(|m| m.positive == c || m.negative == c)
            })
            .collect();
        let mut best = present[0];
        for &c in &present[1..] {
            if votes[c] > votes[best] || (votes[c] == votes[best] && score[c] > score[best]) {
                best = c;
            }
        }
        best
    }
}
