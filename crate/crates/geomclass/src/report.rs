//! CSV outputs: CV tables, confusion matrices, feature tables and the
//! comparison table.

use std::path::Path;

use geomclass_core::efd::FeatureLayout;
use geomclass_core::harness::{ComparisonTable, ConfusionMatrix, CvRow};
use geomclass_core::matrix::Matrix;
use geomclass_core::shallow::Hyper;

use crate::canonical::format_float;
use crate::dataset::DataError;

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> DataError + '_ {
    move |e| DataError::Invalid(format!("{}: {e}", path.display()))
}

fn write_records(path: &Path, records: &[Vec<String>]) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in records {
        w.write_record(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| DataError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_records(path: &Path) -> Result<Vec<Vec<String>>, DataError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(csv_err(path))?;
    r.records()
        .map(|rec| {
            rec.map(|rec| rec.iter().map(str::to_string).collect())
                .map_err(csv_err(path))
        })
        .collect()
}

fn hyper_cells(h: &Hyper) -> [String; 4] {
    let opt = |v: Option<String>| v.unwrap_or_default();
    match *h {
        Hyper::Knn { k } => [opt(Some(k.to_string())), opt(None), opt(None), opt(None)],
        Hyper::Logreg { c } => [opt(None), opt(Some(c.to_string())), opt(None), opt(None)],
        Hyper::Dtree { max_depth } => [
            opt(None),
            opt(None),
            opt(None),
            opt(Some(max_depth.to_string())),
        ],
        Hyper::SvmRbf { c, gamma } => [
            opt(None),
            opt(Some(c.to_string())),
            opt(Some(gamma.to_string())),
            opt(None),
        ],
    }
}

/// `order,k,C,gamma,max_depth,fold_1..fold_n,mean`, one line per combination.
pub fn write_cv_table(path: &Path, rows: &[CvRow]) -> Result<(), DataError> {
    let folds = rows.first().map_or(0, |r| r.fold_scores.len());
    let mut header: Vec<String> = ["order", "k", "C", "gamma", "max_depth"]
        .map(String::from)
        .to_vec();
    header.extend((1..=folds).map(|f| format!("fold_{f}")));
    header.push("mean".into());
    let mut recs = vec![header];
    for r in rows {
        let mut rec = vec![r.order.to_string()];
        rec.extend(hyper_cells(&r.hyper));
        rec.extend(r.fold_scores.iter().map(|v| v.to_string()));
        rec.push(r.mean.to_string());
        recs.push(rec);
    }
    write_records(path, &recs)
}

/// Rows are true classes, columns predicted classes.
pub fn write_confusion(
    path: &Path,
    cm: &ConfusionMatrix,
    class_names: &[String],
) -> Result<(), DataError> {
    let name = |i: usize| class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut header = vec!["true\\predicted".to_string()];
    header.extend((0..cm.num_classes).map(name));
    let mut recs = vec![header];
    for t in 0..cm.num_classes {
        let mut rec = vec![name(t)];
        rec.extend(cm.row(t).iter().map(|c| c.to_string()));
        recs.push(rec);
    }
    write_records(path, &recs)
}

pub fn read_confusion(path: &Path) -> Result<ConfusionMatrix, DataError> {
    let recs = read_records(path)?;
    let bad = || DataError::Invalid(format!("{}: not a confusion matrix", path.display()));
    let k = recs.len().checked_sub(1).ok_or_else(bad)?;
    let mut counts = Vec::with_capacity(k * k);
    for r in &recs[1..] {
        if r.len() != k + 1 {
            return Err(bad());
        }
        for c in &r[1..] {
            counts.push(c.parse().map_err(|_| bad())?);
        }
    }
    Ok(ConfusionMatrix {
        num_classes: k,
        counts,
    })
}

/// Header from the layout, one row per geometry, label column last.
pub fn write_features(
    path: &Path,
    layout: &FeatureLayout,
    ids: &[String],
    x: &Matrix,
    labels: &[usize],
) -> Result<(), DataError> {
    let mut header = vec!["id".to_string()];
    header.extend(layout.names());
    header.push("label".into());
    let mut recs = vec![header];
    for ((id, row), label) in ids.iter().zip(x.iter_rows()).zip(labels) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&v| format_float(v)));
        rec.push(label.to_string());
        recs.push(rec);
    }
    write_records(path, &recs)
}

/// `id,label,predicted` with class names.
pub fn write_predictions(
    path: &Path,
    ids: &[String],
    truth: &[usize],
    pred: &[usize],
    class_names: &[String],
) -> Result<(), DataError> {
    let name = |i: usize| class_names.get(i).cloned().unwrap_or_else(|| i.to_string());
    let mut recs = vec![["id", "label", "predicted"].map(String::from).to_vec()];
    for ((id, &t), &p) in ids.iter().zip(truth).zip(pred) {
        recs.push(vec![id.clone(), name(t), name(p)]);
    }
    write_records(path, &recs)
}

pub fn write_comparison(path: &Path, table: &ComparisonTable) -> Result<(), DataError> {
    write_records(path, &table.records())
}

pub fn read_comparison(path: &Path) -> Result<ComparisonTable, DataError> {
    ComparisonTable::from_records(&read_records(path)?)
        .ok_or_else(|| DataError::Invalid(format!("{}: not a comparison table", path.display())))
}
