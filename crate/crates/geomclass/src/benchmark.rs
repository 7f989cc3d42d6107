//! Loading benchmark data from a directory.
//!
//! A directory in the native layout (see [`crate::dataset`]) loads as is.
//! Anything else goes through a [`BenchmarkAdapter`], which names the
//! label property and geometry column of foreign files: GeoJSON feature
//! collections (`*.geojson`) and CSV tables with a WKT column (`*.csv`).
//! Foreign data is pooled across files and split with the adapter's seed.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use geomclass_core::datagen::LabeledGeometry;
use geomclass_core::harness::split;
use geomclass_core::Geometry;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::dataset::{io_err, DataError, Dataset, MANIFEST_FILE};
use crate::geojson::parse_geojson;
use crate::wkt::parse_wkt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkAdapter {
    /// Feature property or CSV column holding the class label.
    pub label: String,
    /// CSV column holding WKT.
    pub geometry: String,
    /// CSV column holding an identifier; row numbers otherwise.
    pub id: Option<String>,
    pub split_seed: u64,
}

impl Default for BenchmarkAdapter {
    fn default() -> Self {
        Self {
            label: "label".into(),
            geometry: "wkt".into(),
            id: Some("id".into()),
            split_seed: 0,
        }
    }
}

pub fn load_benchmark(
    dir: &Path,
    adapter: Option<&BenchmarkAdapter>,
) -> Result<Dataset, DataError> {
    let manifest = dir.join(MANIFEST_FILE);
    match adapter {
        _ if manifest.is_file() => Dataset::load(dir),
        Some(a) if dir.is_dir() => load_foreign(dir, a),
        _ => Err(DataError::Missing(manifest)),
    }
}

fn foreign_files(dir: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("geojson" | "csv")
            )
        })
        .collect();
    files.sort();
    Ok(files)
}

fn read_csv(path: &Path, a: &BenchmarkAdapter) -> Result<Vec<(Geometry, String)>, DataError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let missing = |name: &str| DataError::Manifest {
        path: path.to_path_buf(),
        message: format!("label column {name:?} absent"),
    };
    let label_col = col(&a.label).ok_or_else(|| missing(&a.label))?;
    let geom_col = col(&a.geometry).ok_or_else(|| DataError::Manifest {
        path: path.to_path_buf(),
        message: format!("geometry column {:?} absent", a.geometry),
    })?;
    let id_col = a.id.as_deref().and_then(col);
    let known: Vec<usize> = [Some(label_col), Some(geom_col), id_col]
        .into_iter()
        .flatten()
        .collect();
    let unknown: Vec<&str> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| !known.contains(i))
        .map(|(_, h)| h)
        .collect();
    if !unknown.is_empty() {
        log::warn!("{}: ignoring unknown columns {:?}", path.display(), unknown);
    }
    let mut out = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let rec_err = |message: String| DataError::Record {
            path: path.to_path_buf(),
            line,
            message,
        };
        let row = row.map_err(|e| rec_err(e.to_string()))?;
        let id = id_col
            .and_then(|c| row.get(c))
            .map_or_else(|| (line - 2).to_string(), str::to_string);
        let g =
            parse_wkt(&id, row.get(geom_col).unwrap_or("")).map_err(|e| rec_err(e.to_string()))?;
        out.push((g, row.get(label_col).unwrap_or("").to_string()));
    }
    Ok(out)
}

fn load_foreign(dir: &Path, a: &BenchmarkAdapter) -> Result<Dataset, DataError> {
    let files = foreign_files(dir)?;
    if files.is_empty() {
        return Err(DataError::Missing(dir.join(MANIFEST_FILE)));
    }
    let mut pooled = Vec::new();
    for path in &files {
        let items = if path.extension().and_then(|e| e.to_str()) == Some("csv") {
            read_csv(path, a)?
        } else {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_geojson(&text, &a.label)
                .map_err(|e| DataError::Invalid(format!("{}: {e}", path.display())))?
        };
        pooled.extend(items);
    }
    let class_names: Vec<String> = pooled
        .iter()
        .map(|(_, l)| l.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: BTreeMap<&str, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let items: Vec<LabeledGeometry> = pooled
        .iter()
        .map(|(g, l)| LabeledGeometry {
            geometry: g.clone(),
            label: index[l.as_str()],
        })
        .collect();
    let sp = split(items.len(), a.split_seed).map_err(|e| DataError::Invalid(e.to_string()))?;
    let names: Vec<String> = files.iter().map(|p| p.display().to_string()).collect();
    Ok(Dataset::from_split(
        &items,
        &sp,
        class_names,
        None,
        json!({"files": names, "adapter": a}),
    ))
}
