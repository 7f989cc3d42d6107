use geomclass_core::matrix::Matrix;
use geomclass_core::shallow::{
    fit_dtree, fit_knn, fit_logreg, fit_svm_rbf, LogRegOptions, SvmOptions,
};
use proptest::prelude::*;

fn dataset(
    max_rows: usize,
    cols: usize,
    classes: usize,
) -> impl Strategy<Value = (Matrix, Vec<usize>)> {
    (classes..max_rows).prop_flat_map(move |n| {
        (
            prop::collection::vec(-5.0..5.0f64, n * cols),
            prop::collection::vec(0..classes, n),
        )
            .prop_map(move |(data, mut y)| {
                for (c, slot) in y.iter_mut().take(classes).enumerate() {
                    *slot = c;
                }
                (Matrix::new(n, cols, data), y)
            })
    })
}

/// All-pairs kNN: stable sort by distance, vote, ties by summed distance
/// then class index.
fn brute_knn(x: &Matrix, y: &[usize], k: usize, q: &[f64]) -> usize {
    let mut d: Vec<(f64, usize)> = (0..x.rows())
        .map(|i| {
            let sq: f64 = x.row(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            (sq.sqrt(), y[i])
        })
        .collect();
    d.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let classes = y.iter().max().unwrap() + 1;
    let mut tally = vec![(0usize, 0.0f64); classes];
    for &(dist, c) in &d[..k] {
        tally[c].0 += 1;
        tally[c].1 += dist;
    }
    (0..classes)
        .max_by(|&a, &b| {
            tally[a]
                .0
                .cmp(&tally[b].0)
                .then(tally[b].1.partial_cmp(&tally[a].1).unwrap())
                .then(b.cmp(&a))
        })
        .unwrap()
}

fn train_accuracy(pred: impl Fn(&[f64]) -> usize, x: &Matrix, y: &[usize]) -> f64 {
    (0..x.rows()).filter(|&i| pred(x.row(i)) == y[i]).count() as f64 / x.rows() as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn knn_matches_all_pairs_search(
        (x, y) in dataset(60, 3, 3),
        queries in prop::collection::vec(prop::collection::vec(-6.0..6.0f64, 3), 1..20),
        k in 1usize..8,
    ) {
        let k = k.min(x.rows());
        let model = fit_knn(&x, &y, k).unwrap();
        for q in &queries {
            prop_assert_eq!(model.predict_row(q), brute_knn(&x, &y, k, q));
        }
    }

    #[test]
    fn deeper_trees_fit_training_data_no_worse((x, y) in dataset(120, 2, 3)) {
        let mut last = 0.0;
        for depth in 1..=8 {
            let tree = fit_dtree(&x, &y, depth).unwrap();
            let acc = train_accuracy(|r| tree.predict_row(r), &x, &y);
            prop_assert!(acc >= last - 1e-12, "depth {depth}: {acc} < {last}");
            last = acc;
        }
    }

    #[test]
    fn logreg_objective_never_increases((x, y) in dataset(80, 4, 3), c in 0.01..100.0f64) {
        let model = fit_logreg(&x, &y, c, &LogRegOptions::default()).unwrap();
        for w in model.loss_trace.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "{} -> {}", w[0], w[1]);
        }
        let p = model.probabilities(x.row(0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn full_depth_tree_separates_distinct_points() {
    let x = Matrix::from_rows(
        &[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [0.5, 0.5]],
        2,
    );
    let y = [0, 1, 1, 0, 2];
    let tree = fit_dtree(&x, &y, 10).unwrap();
    assert_eq!(train_accuracy(|r| tree.predict_row(r), &x, &y), 1.0);
}

#[test]
fn rbf_svm_solves_xor() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (cx, cy, label) in [(0.0, 0.0, 0), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)] {
        for i in 0..10 {
            let t = i as f64 * 0.628;
            rows.push([cx + 0.05 * t.cos(), cy + 0.05 * t.sin()]);
            y.push(label);
        }
    }
    let x = Matrix::from_rows(&rows, 2);
    let svm = fit_svm_rbf(&x, &y, 10.0, 2.0, &SvmOptions::default()).unwrap();
    assert_eq!(train_accuracy(|r| svm.predict_row(r), &x, &y), 1.0);
    assert_eq!(svm.predict_row(&[0.02, 0.98]), 1);
    assert_eq!(svm.predict_row(&[0.97, 0.96]), 0);
}
