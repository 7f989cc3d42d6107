//! On-disk datasets: a `manifest.json` next to `train.ndjson`,
//! `val.ndjson` and `test.ndjson`, one canonical JSON record per line.

use std::collections::BTreeSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use geomclass_core::datagen::LabeledGeometry;
use geomclass_core::encoding::{GeometrySequence, StdConvention, VertexVector};
use geomclass_core::harness::Split;
use geomclass_core::Point;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical::to_canonical_string;
use crate::wkt::{parse_wkt, to_wkt, WktError};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SPLITS: [&str; 3] = ["train", "val", "test"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing file {0}")]
    Missing(PathBuf),
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordForm {
    /// `{id, label, wkt}`
    Raw,
    /// `{id, label, mean, seq}`
    Encoded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub fn get(&self, split: &str) -> usize {
        match split {
            "train" => self.train,
            "val" => self.val,
            _ => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    /// Seed of the generator that produced the data, if synthetic.
    pub data: Option<u64>,
    pub split: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub form: RecordForm,
    pub class_names: Vec<String>,
    pub counts: SplitCounts,
    /// Coordinate scale of encoded records, computed on the training split.
    pub scale_factor: Option<f64>,
    pub std_convention: StdConvention,
    pub max_points: usize,
    pub feature_layout_version: u32,
    pub seeds: Seeds,
    pub prng: String,
    pub split_rule: String,
    /// Free-form provenance, e.g. the generator settings.
    #[serde(default)]
    pub source: Value,
}

pub const SPLIT_RULE: &str =
    "seeded shuffle; 80/10/10, train kept >= 10000 with val/test >= 1000 when n allows";
pub const STRATIFIED_RULE: &str = "stratified by class, largest remainder";

impl DatasetManifest {
    pub fn validate(&self, path: &Path) -> Result<(), DataError> {
        let bad = |message: String| DataError::Manifest {
            path: path.to_path_buf(),
            message,
        };
        if self.format_version != FORMAT_VERSION {
            return Err(bad(format!(
                "unsupported format version {}",
                self.format_version
            )));
        }
        if self.class_names.is_empty() {
            return Err(bad("no class names".into()));
        }
        match (self.form, self.scale_factor) {
            (RecordForm::Encoded, None) => {
                return Err(bad("encoded dataset without scale factor".into()))
            }
            (_, Some(s)) if !(s > 0.0 && s.is_finite()) => {
                return Err(bad(format!("scale factor {s} is not positive")))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub label: usize,
    pub wkt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedRecord {
    pub id: String,
    pub label: usize,
    /// Vertex mean removed before scaling.
    pub mean: [f64; 2],
    pub seq: Vec<[f64; 5]>,
}

impl EncodedRecord {
    pub fn from_sequence(seq: &GeometrySequence, mean: Point) -> Self {
        Self {
            id: seq.id.clone(),
            label: seq.label,
            mean: [mean.x, mean.y],
            seq: seq.vectors.iter().map(|v| v.0).collect(),
        }
    }

    pub fn sequence(&self) -> GeometrySequence {
        GeometrySequence {
            id: self.id.clone(),
            label: self.label,
            vectors: self.seq.iter().map(|&v| VertexVector(v)).collect(),
        }
    }

    pub fn mean(&self) -> Point {
        Point::new(self.mean[0], self.mean[1])
    }
}

/// The records of one split in either form.
#[derive(Debug, Clone, PartialEq)]
pub enum Records {
    Raw(Vec<LabeledGeometry>),
    Encoded(Vec<EncodedRecord>),
}

impl Records {
    pub fn len(&self) -> usize {
        match self {
            Records::Raw(v) => v.len(),
            Records::Encoded(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn labels(&self) -> Vec<usize> {
        match self {
            Records::Raw(v) => v.iter().map(|r| r.label).collect(),
            Records::Encoded(v) => v.iter().map(|r| r.label).collect(),
        }
    }

    pub fn raw(&self) -> Option<&[LabeledGeometry]> {
        match self {
            Records::Raw(v) => Some(v),
            Records::Encoded(_) => None,
        }
    }

    pub fn encoded(&self) -> Option<&[EncodedRecord]> {
        match self {
            Records::Raw(_) => None,
            Records::Encoded(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub train: Records,
    pub val: Records,
    pub test: Records,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&Records> {
        match name {
            "train" => Some(&self.train),
            "val" => Some(&self.val),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.manifest.class_names.len()
    }

    /// Assembles a raw dataset from labeled geometries and a split.
    pub fn from_split(
        items: &[LabeledGeometry],
        split: &Split,
        class_names: Vec<String>,
        data_seed: Option<u64>,
        source: Value,
    ) -> Self {
        let pick = |idx: &[usize]| Records::Raw(idx.iter().map(|&i| items[i].clone()).collect());
        let manifest = DatasetManifest {
            format_version: FORMAT_VERSION,
            form: RecordForm::Raw,
            class_names,
            counts: SplitCounts {
                train: split.train.len(),
                val: split.val.len(),
                test: split.test.len(),
            },
            scale_factor: None,
            std_convention: StdConvention::Population,
            max_points: geomclass_core::encoding::DEFAULT_MAX_POINTS,
            feature_layout_version: geomclass_core::efd::FEATURE_LAYOUT_VERSION,
            seeds: Seeds {
                data: data_seed,
                split: split.seed,
            },
            prng: geomclass_core::datagen::PRNG_NAME.to_string(),
            split_rule: SPLIT_RULE.to_string(),
            source,
        };
        Dataset {
            manifest,
            train: pick(&split.train),
            val: pick(&split.val),
            test: pick(&split.test),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), DataError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        for name in SPLITS {
            let path = dir.join(format!("{name}.ndjson"));
            match self.split(name).expect("known split") {
                Records::Raw(v) => write_ndjson(
                    &path,
                    v.iter().map(|r| RawRecord {
                        id: r.geometry.id.clone(),
                        label: r.label,
                        wkt: to_wkt(&r.geometry),
                    }),
                )?,
                Records::Encoded(v) => write_ndjson(&path, v.iter())?,
            }
        }
        write_json(&dir.join(MANIFEST_FILE), &self.manifest)
    }

    /// Reads a dataset in this crate's native layout.
    pub fn load(dir: &Path) -> Result<Self, DataError> {
        let mpath = dir.join(MANIFEST_FILE);
        if !mpath.is_file() {
            return Err(DataError::Missing(mpath));
        }
        let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
        let manifest: DatasetManifest =
            serde_json::from_str(&text).map_err(|e| DataError::Manifest {
                path: mpath.clone(),
                message: e.to_string(),
            })?;
        manifest.validate(&mpath)?;
        let mut splits = Vec::with_capacity(3);
        for name in SPLITS {
            let path = dir.join(format!("{name}.ndjson"));
            if !path.is_file() {
                return Err(DataError::Missing(path));
            }
            let records = match manifest.form {
                RecordForm::Raw => Records::Raw(
                    read_ndjson::<RawRecord>(&path, &["id", "label", "wkt"])?
                        .into_iter()
                        .enumerate()
                        .map(|(i, r)| {
                            parse_wkt(&r.id, &r.wkt)
                                .map(|geometry| LabeledGeometry {
                                    geometry,
                                    label: r.label,
                                })
                                .map_err(|e: WktError| DataError::Record {
                                    path: path.clone(),
                                    line: i + 1,
                                    message: e.to_string(),
                                })
                        })
                        .collect::<Result<_, _>>()?,
                ),
                RecordForm::Encoded => {
                    Records::Encoded(read_ndjson(&path, &["id", "label", "mean", "seq"])?)
                }
            };
            if records.len() != manifest.counts.get(name) {
                return Err(DataError::Manifest {
                    path: mpath.clone(),
                    message: format!(
                        "{name} count {} but {} records",
                        manifest.counts.get(name),
                        records.len()
                    ),
                });
            }
            if let Some(bad) = records
                .labels()
                .iter()
                .position(|&l| l >= manifest.class_names.len())
            {
                return Err(DataError::Record {
                    path,
                    line: bad + 1,
                    message: format!(
                        "label out of range for {} classes",
                        manifest.class_names.len()
                    ),
                });
            }
            splits.push(records);
        }
        let test = splits.pop().expect("three splits");
        let val = splits.pop().expect("three splits");
        let train = splits.pop().expect("three splits");
        Ok(Dataset {
            manifest,
            train,
            val,
            test,
        })
    }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), DataError> {
    let mut text = to_canonical_string(value).map_err(|e| DataError::Invalid(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, DataError> {
    if !path.is_file() {
        return Err(DataError::Missing(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DataError::Record {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

pub fn write_ndjson<T: Serialize>(
    path: &Path,
    records: impl IntoIterator<Item = T>,
) -> Result<(), DataError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = to_canonical_string(&r).map_err(|e| DataError::Invalid(e.to_string()))?;
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads one record per non-empty line. Keys outside `known` are ignored
/// with a single warning per file.
pub fn read_ndjson<T: serde::de::DeserializeOwned>(
    path: &Path,
    known: &[&str],
) -> Result<Vec<T>, DataError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    let mut unknown = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec_err = |message: String| DataError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let v: Value = serde_json::from_str(&line).map_err(|e| rec_err(e.to_string()))?;
        if let Value::Object(map) = &v {
            unknown.extend(map.keys().filter(|k| !known.contains(&k.as_str())).cloned());
        }
        out.push(serde_json::from_value(v).map_err(|e| rec_err(e.to_string()))?);
    }
    if !unknown.is_empty() {
        log::warn!("{}: ignoring unknown fields {:?}", path.display(), unknown);
    }
    Ok(out)
}
