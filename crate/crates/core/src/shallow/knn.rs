use alloc::vec::Vec;
#[allow(unused_imports)] // inherent on newer toolchains
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::{check_training, ShallowError};
use crate::matrix::{squared_distance, Matrix};

/// k-nearest-neighbour majority vote under Euclidean distance.
///
/// Neighbours at equal distance are taken in training order. Vote ties go
/// to the class with the smaller summed neighbour distance, then to the
/// lower class index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub k: usize,
    train: Matrix,
    labels: Vec<usize>,
    num_classes: usize,
}

pub fn fit_knn(x: &Matrix, y: &[usize], k: usize) -> Result<Knn, ShallowError> {
    let num_classes = check_training(x, y)?;
    if k == 0 || k > x.rows() {
        return Err(ShallowError::BadK { k, n: x.rows() });
    }
    Ok(Knn {
        k,
        train: x.clone(),
        labels: y.to_vec(),
        num_classes,
    })
}

impl Knn {
    pub fn dims(&self) -> usize {
        self.train.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Indices of the `k` nearest training rows with their distances.
    pub fn neighbours(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let mut d: Vec<(f64, usize)> = self
            .train
            .iter_rows()
            .enumerate()
            .map(|(i, r)| (squared_distance(q, r), i))
            .collect();
        let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, order);
            d.truncate(self.k);
        }
        d.sort_by(order);
        d.into_iter().map(|(sq, i)| (sq.sqrt(), i)).collect()
    }

    pub fn predict_row(&self, q: &[f64]) -> usize {
        let mut votes = alloc::vec![0usize; self.num_classes];
        let mut dist = alloc::vec![0.0; self.num_classes];
        for (d, i) in self.neighbours(q) {
            votes[self.labels[i]] += 1;
            dist[self.labels[i]] += d;
        }
        let mut best = 0;
        for c in 1..self.num_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && dist[c] < dist[best]) {
                best = c;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shallow::testdata;

    #[test]
    fn one_neighbour_memorizes() {
        let (x, y) = testdata::random(40, 3, 3, 1);
        let m = fit_knn(&x, &y, 1).unwrap();
        let pred: Vec<usize> = x.iter_rows().map(|r| m.predict_row(r)).collect();
        assert_eq!(pred, y);
    }

    #[test]
    fn k_equal_n_predicts_training_majority() {
        let (x, mut y) = testdata::random(21, 2, 3, 2);
        y.iter_mut().take(12).for_each(|l| *l = 2);
        let m = fit_knn(&x, &y, 21).unwrap();
        assert!(x.iter_rows().all(|r| m.predict_row(r) == 2));
    }

    #[test]
    fn tie_rules() {
        // Query at the origin: class 1 point at distance 1 and class 0 point
        // at distance 1; the others are far away.
        let x = Matrix::new(4, 2, alloc::vec![1.0, 0.0, -1.0, 0.0, 10.0, 0.0, 0.0, 10.0]);
        let y = [1, 0, 0, 1];
        let m = fit_knn(&x, &y, 2).unwrap();
        assert_eq!(m.predict_row(&[0.0, 0.0]), 0);
        // Shifted towards the class-1 point: equal votes, smaller distance.
        assert_eq!(m.predict_row(&[0.1, 0.0]), 1);
    }

    #[test]
    fn bad_k() {
        let (x, y) = testdata::random(5, 2, 2, 0);
        assert_eq!(fit_knn(&x, &y, 0), Err(ShallowError::BadK { k: 0, n: 5 }));
        assert_eq!(fit_knn(&x, &y, 6), Err(ShallowError::BadK { k: 6, n: 5 }));
    }
}
