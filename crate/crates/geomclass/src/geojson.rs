//! GeoJSON `FeatureCollection` ingestion and export.

use geomclass_core::{Geometry, Point};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::wkt::{rings_to_geometry, WktError};

#[derive(Debug, Error)]
pub enum GeoJsonError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("feature {feature}: {message}")]
    Structure { feature: usize, message: String },
    #[error("feature {feature}: missing label property {property:?}")]
    MissingLabel { feature: usize, property: String },
    #[error("feature {feature}: {source}")]
    Geometry { feature: usize, source: WktError },
}

fn structure(feature: usize, message: impl Into<String>) -> GeoJsonError {
    GeoJsonError::Structure {
        feature,
        message: message.into(),
    }
}

fn ring(v: &Value, feature: usize) -> Result<Vec<Point>, GeoJsonError> {
    let arr = v
        .as_array()
        .ok_or_else(|| structure(feature, "ring is not an array"))?;
    arr.iter()
        .map(|p| match p.as_array().map(|a| a.as_slice()) {
            Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok(Point::new(x, y)),
                _ => Err(structure(feature, "non-numeric coordinate")),
            },
            _ => Err(structure(feature, "position needs two coordinates")),
        })
        .collect()
}

fn polygon(v: &Value, feature: usize) -> Result<Vec<Vec<Point>>, GeoJsonError> {
    v.as_array()
        .ok_or_else(|| structure(feature, "polygon is not an array"))?
        .iter()
        .map(|r| ring(r, feature))
        .collect()
}

fn label_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Reads every feature of a collection as `(geometry, label)`, in input
/// order. Ids come from the feature `id` member, or the feature index.
pub fn parse_geojson(
    text: &str,
    label_property: &str,
) -> Result<Vec<(Geometry, String)>, GeoJsonError> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(structure(0, "top level is not a FeatureCollection"));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| structure(0, "missing features array"))?;
    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let label = f
            .get("properties")
            .and_then(|p| p.get(label_property))
            .and_then(label_text)
            .ok_or_else(|| GeoJsonError::MissingLabel {
                feature: i,
                property: label_property.to_string(),
            })?;
        let id = match f.get("id") {
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => i.to_string(),
        };
        let geom = f
            .get("geometry")
            .ok_or_else(|| structure(i, "missing geometry"))?;
        let coords = geom
            .get("coordinates")
            .ok_or_else(|| structure(i, "missing coordinates"))?;
        let polygons = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![polygon(coords, i)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| structure(i, "multipolygon is not an array"))?
                .iter()
                .map(|p| polygon(p, i))
                .collect::<Result<_, _>>()?,
            other => return Err(structure(i, format!("unsupported geometry type {other:?}"))),
        };
        let g = rings_to_geometry(&id, polygons)
            .map_err(|source| GeoJsonError::Geometry { feature: i, source })?;
        out.push((g, label));
    }
    Ok(out)
}

/// Inverse of [`parse_geojson`]: one feature per entry, the label stored
/// under `label_property`.
pub fn to_geojson(items: &[(Geometry, String)], label_property: &str) -> Value {
    let features: Vec<Value> = items
        .iter()
        .map(|(g, label)| {
            let rings: Vec<Value> = g
                .rings()
                .iter()
                .map(|r| Value::from(r.vertices().iter().map(|p| json!([p.x, p.y])).collect::<Vec<_>>()))
                .collect();
            let geometry = if rings.len() == 1 {
                json!({"type": "Polygon", "coordinates": rings})
            } else {
                json!({"type": "MultiPolygon", "coordinates": rings.into_iter().map(|r| json!([r])).collect::<Vec<_>>()})
            };
            let mut props = Map::new();
            props.insert(label_property.to_string(), Value::from(label.clone()));
            json!({"type": "Feature", "id": g.id.clone(), "properties": props, "geometry": geometry})
        })
        .collect();
    json!({"type": "FeatureCollection", "features": features})
}
