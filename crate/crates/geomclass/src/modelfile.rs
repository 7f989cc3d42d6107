//! Persisted models. Parameters are written as canonical JSON, keyed by
//! layer and parameter name with their shapes, and reload bit-exactly.

use std::path::Path;

use geomclass_core::harness::FittedShallow;
use geomclass_core::models::DeepModel;
use serde::{Deserialize, Serialize};

use crate::dataset::{read_json, write_json, DataError};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum SavedModel {
    Shallow(FittedShallow),
    Deep {
        network: DeepModel,
        /// Scale the inputs were encoded with.
        scale_factor: f64,
        max_points: usize,
        mask_padding: bool,
        /// Training bin lengths; evaluation batches are padded to match.
        #[serde(default)]
        train_bins: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub class_names: Vec<String>,
    pub model: SavedModel,
}

impl ModelFile {
    pub fn new(class_names: Vec<String>, model: SavedModel) -> Self {
        Self {
            format_version: MODEL_FORMAT_VERSION,
            class_names,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        let m: ModelFile = read_json(path)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(DataError::Manifest {
                path: path.to_path_buf(),
                message: format!("unsupported model format version {}", m.format_version),
            });
        }
        Ok(m)
    }
}
