//! Turning stored datasets into the inputs of the core models.

use geomclass_core::datagen::LabeledGeometry;
use geomclass_core::encoding::{
    compute_scale_factor, denormalize, encode, simplify_if_needed, Batch, GeometrySequence,
    ScaleFactor,
};
use geomclass_core::exec::Executor;
use geomclass_core::geometry::vertex_mean;
use geomclass_core::harness::FeatureTable;
use geomclass_core::{Geometry, Ring};

use crate::dataset::{DataError, Dataset, EncodedRecord, RecordForm, Records, SPLITS};

fn invalid(e: impl std::fmt::Display) -> DataError {
    DataError::Invalid(e.to_string())
}

fn split_records<'a>(ds: &'a Dataset, split: &str) -> Result<&'a Records, DataError> {
    ds.split(split)
        .ok_or_else(|| DataError::Invalid(format!("unknown split {split:?}")))
}

/// The scale factor of a dataset: stored for encoded data, computed from
/// the training split otherwise.
pub fn scale_factor(ds: &Dataset) -> Result<ScaleFactor, DataError> {
    if let Some(s) = ds.manifest.scale_factor {
        return ScaleFactor::new(s).map_err(invalid);
    }
    let train = ds
        .train
        .raw()
        .ok_or_else(|| invalid("encoded dataset without a scale factor"))?;
    compute_scale_factor(train.iter().map(|r| &r.geometry)).map_err(invalid)
}

/// Geometries of one split; encoded records are denormalized back into
/// coordinates.
pub fn geometries(ds: &Dataset, split: &str) -> Result<Vec<LabeledGeometry>, DataError> {
    match split_records(ds, split)? {
        Records::Raw(v) => Ok(v.clone()),
        Records::Encoded(v) => {
            let s = scale_factor(ds)?;
            v.iter()
                .map(|r| {
                    let seq = denormalize(&r.sequence(), r.mean(), s);
                    let rings = seq
                        .rings()
                        .into_iter()
                        .map(Ring::new)
                        .collect::<Result<Vec<_>, _>>();
                    let geometry = rings
                        .and_then(|rings| Geometry::new(r.id.clone(), rings))
                        .map_err(invalid)?;
                    Ok(LabeledGeometry {
                        geometry,
                        label: r.label,
                    })
                })
                .collect()
        }
    }
}

fn encode_record(
    g: &LabeledGeometry,
    s: ScaleFactor,
    max_points: usize,
) -> Result<EncodedRecord, DataError> {
    let simplified = simplify_if_needed(&g.geometry, max_points).map_err(invalid)?;
    Ok(EncodedRecord::from_sequence(
        &encode(&simplified, g.label, s),
        vertex_mean(&simplified),
    ))
}

/// Normalized sequences of one split.
pub fn sequences(
    ds: &Dataset,
    split: &str,
    s: ScaleFactor,
    max_points: usize,
) -> Result<Vec<GeometrySequence>, DataError> {
    match split_records(ds, split)? {
        Records::Encoded(v) => Ok(v.iter().map(EncodedRecord::sequence).collect()),
        Records::Raw(v) => v
            .iter()
            .map(|g| encode_record(g, s, max_points).map(|r| r.sequence()))
            .collect(),
    }
}

/// The encoded form of a raw dataset, scaled by its training split.
pub fn encode_dataset(ds: &Dataset, max_points: usize) -> Result<Dataset, DataError> {
    let s = scale_factor(ds)?;
    let mut out = ds.clone();
    for name in SPLITS {
        let records = match split_records(ds, name)? {
            Records::Raw(v) => Records::Encoded(
                v.iter()
                    .map(|g| encode_record(g, s, max_points))
                    .collect::<Result<_, _>>()?,
            ),
            Records::Encoded(v) => Records::Encoded(v.clone()),
        };
        match name {
            "train" => out.train = records,
            "val" => out.val = records,
            _ => out.test = records,
        }
    }
    out.manifest.form = RecordForm::Encoded;
    out.manifest.scale_factor = Some(s.get());
    out.manifest.max_points = max_points;
    Ok(out)
}

/// EFD features of one split up to `order`, with ids and labels.
pub fn feature_table<E: Executor>(
    ds: &Dataset,
    split: &str,
    order: usize,
    exec: &E,
) -> Result<(FeatureTable, Vec<String>, Vec<usize>), DataError> {
    let items = geometries(ds, split)?;
    let refs: Vec<&Geometry> = items.iter().map(|g| &g.geometry).collect();
    let table = FeatureTable::compute(&refs, order, exec).map_err(invalid)?;
    let ids = items.iter().map(|g| g.geometry.id.clone()).collect();
    let labels = items.iter().map(|g| g.label).collect();
    Ok((table, ids, labels))
}

/// How evaluation sequences are padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalPadding {
    /// Pad to the training bin lengths, so evaluation inputs carry the same
    /// amount of padding as training inputs of similar length.
    TrainBins,
    /// Bin the evaluation split on its own.
    OwnBins,
}

/// Batches for an evaluation split.
pub fn eval_batches(
    seqs: &[GeometrySequence],
    batch_size: usize,
    n_bin: usize,
    padding: EvalPadding,
    train_bins: &[usize],
) -> Result<Vec<Batch>, DataError> {
    match padding {
        EvalPadding::TrainBins if !train_bins.is_empty() => {
            geomclass_core::encoding::bin_like(seqs, batch_size, train_bins).map_err(invalid)
        }
        _ => geomclass_core::encoding::bin_and_pad(seqs, batch_size, n_bin).map_err(invalid),
    }
}
