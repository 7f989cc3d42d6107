use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{check_training, majority, ShallowError};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Majority class of the training samples reaching this node.
    pub class: usize,
    pub samples: usize,
    pub depth: usize,
    /// `(feature, threshold, left, right)`; samples with `x[feature] <= threshold` go left.
    pub split: Option<(usize, f64, usize, usize)>,
}

/// CART classifier with Gini impurity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub max_depth: usize,
    pub nodes: Vec<TreeNode>,
    dims: usize,
    num_classes: usize,
}

fn gini(counts: &[usize], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts
        .iter()
        .map(|&c| (c as f64 / n) * (c as f64 / n))
        .sum::<f64>()
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [usize],
    k: usize,
    max_depth: usize,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], counts: &[usize]) -> Option<(usize, f64)> {
        let n = idx.len();
        let parent = gini(counts, n);
        let mut best: Option<(usize, f64)> = None;
        let mut best_gain = 1e-12;
        let mut pairs: Vec<(f64, usize)> = Vec::with_capacity(n);
        let mut left = alloc::vec![0usize; self.k];
        let mut right = alloc::vec![0usize; self.k];
        for f in 0..self.x.cols() {
            pairs.clear();
            pairs.extend(idx.iter().map(|&i| (self.x.get(i, f), self.y[i])));
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            right.copy_from_slice(counts);
            for i in 0..n - 1 {
                let (v, c) = pairs[i];
                left[c] += 1;
                right[c] -= 1;
                let next = pairs[i + 1].0;
                if next <= v {
                    continue;
                }
                let nl = i + 1;
                let nr = n - nl;
                let weighted =
                    (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
                let gain = parent - weighted;
                if gain > best_gain {
                    best_gain = gain;
                    best = Some((f, v + (next - v) / 2.0));
                }
            }
        }
        best
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let mut counts = alloc::vec![0usize; self.k];
        for &i in &idx {
            counts[self.y[i]] += 1;
        }
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            class: majority(&counts),
            samples: idx.len(),
            depth,
            split: None,
        });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if depth >= self.max_depth || pure || idx.len() < 2 {
            return id;
        }
        if let Some((f, t)) = self.best_split(&idx, &counts) {
            let (l, r): (Vec<usize>, Vec<usize>) =
                idx.iter().partition(|&&i| self.x.get(i, f) <= t);
            let left = self.build(l, depth + 1);
            let right = self.build(r, depth + 1);
            self.nodes[id].split = Some((f, t, left, right));
        }
        id
    }
}

pub fn fit_dtree(x: &Matrix, y: &[usize], max_depth: usize) -> Result<DecisionTree, ShallowError> {
    if max_depth == 0 {
        return Err(ShallowError::ZeroDepth);
    }
    let k = check_training(x, y)?;
    let mut b = Builder {
        x,
        y,
        k,
        max_depth,
        nodes: Vec::new(),
    };
    b.build((0..x.rows()).collect(), 0);
    Ok(DecisionTree {
        max_depth,
        nodes: b.nodes,
        dims: x.cols(),
        num_classes: k,
    })
}

impl DecisionTree {
    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn split_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_some()).count()
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        self.predict_row_at_depth(row, self.max_depth)
    }

    /// Prediction of the same tree grown with a smaller depth limit.
    ///
    /// Growth is greedy and top-down, so truncating at `depth` reproduces a
    /// tree fitted with `max_depth = depth` exactly.
    pub fn predict_row_at_depth(&self, row: &[f64], depth: usize) -> usize {
        let mut node = &self.nodes[0];
        while let Some((f, t, l, r)) = node.split {
            if node.depth >= depth {
                break;
            }
            node = &self.nodes[if row[f] <= t { l } else { r }];
        }
        node.class
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shallow::testdata;

    fn accuracy(t: &DecisionTree, x: &Matrix, y: &[usize], depth: usize) -> f64 {
        let hits = x
            .iter_rows()
            .zip(y)
            .filter(|(r, &l)| t.predict_row_at_depth(r, depth) == l)
            .count();
        hits as f64 / y.len() as f64
    }

    #[test]
    fn one_split_at_zero() {
        let xs = [-3.0, -2.0, -0.5, 0.5, 1.0, 4.0];
        let x = Matrix::new(6, 1, xs.to_vec());
        let y = [0, 0, 0, 1, 1, 1];
        let t = fit_dtree(&x, &y, 1).unwrap();
        assert_eq!(t.split_count(), 1);
        assert_eq!(t.nodes[0].split.unwrap().1, 0.0);
        assert_eq!(accuracy(&t, &x, &y, 1), 1.0);
    }

    #[test]
    fn pure_labels_make_a_leaf() {
        let (x, _) = testdata::random(30, 3, 2, 1);
        let t = fit_dtree(&x, &[1; 30], 5).unwrap();
        assert_eq!(t.nodes.len(), 1);
        assert_eq!(t.predict_row(x.row(0)), 1);
    }

    #[test]
    fn ties_prefer_lower_feature() {
        // Both columns separate perfectly.
        let x = Matrix::new(4, 2, alloc::vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let t = fit_dtree(&x, &[0, 0, 1, 1], 1).unwrap();
        assert_eq!(t.nodes[0].split.unwrap().0, 0);
        assert_eq!(t.nodes[0].split.unwrap().1, 1.5);
    }

    #[test]
    fn accuracy_monotone_in_depth_and_truncation_matches_refit() {
        let (x, y) = testdata::random(200, 5, 3, 42);
        let deep = fit_dtree(&x, &y, 8).unwrap();
        let mut prev = 0.0;
        for d in 1..=8 {
            let t = fit_dtree(&x, &y, d).unwrap();
            let acc = accuracy(&t, &x, &y, d);
            assert!(acc >= prev);
            prev = acc;
            for r in x.iter_rows() {
                assert_eq!(t.predict_row(r), deep.predict_row_at_depth(r, d));
            }
        }
    }
}
