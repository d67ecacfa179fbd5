//! Map-ready export of interval widths and adaptivity classes.
//!
//! Without geometry the export is a flat table keyed by unit id. With a
//! GeoJSON `FeatureCollection` every matching feature is annotated, and a
//! second collection keeps only the units with a nonzero interval width,
//! shaded black when the interval spans `[0, 1]` and grey otherwise.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::conformal::AdaptivityClass;
use crate::error::Error;
use crate::io::{fmt_f64, IntervalRow};

#[derive(Debug, Error, PartialEq)]
pub enum MapError {
    #[error("geometry has no feature for units: {}", .0.join(", "))]
    GeometryJoin(Vec<String>),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapRow {
    pub unit_id: String,
    pub adaptivity_class: AdaptivityClass,
    pub width: f64,
    pub covered: bool,
}

impl MapRow {
    /// Fill used in the highlight layer; `None` for zero-width units.
    pub fn shade(&self) -> Option<&'static str> {
        match self.adaptivity_class {
            AdaptivityClass::ZeroWidth => None,
            AdaptivityClass::Intermediate => Some("grey"),
            AdaptivityClass::Full => Some("black"),
        }
    }
}

pub fn map_rows(intervals: &[IntervalRow]) -> Vec<MapRow> {
    intervals
        .iter()
        .map(|r| MapRow {
            unit_id: r.unit_id.clone(),
            adaptivity_class: r.interval.adaptivity_class,
            width: r.interval.width(),
            covered: r.covered,
        })
        .collect()
}

pub fn write_map_csv(path: &Path, rows: &[MapRow]) -> Result<(), Error> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let err = |e: csv::Error| Error::format(path, e);
    w.write_record(["unit_id", "adaptivity_class", "width", "covered"]).map_err(err)?;
    for r in rows {
        w.write_record([
            r.unit_id.clone(),
            r.adaptivity_class.as_str().to_string(),
            fmt_f64(r.width),
            u8::from(r.covered).to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyMap {
    /// Every input feature; matched ones carry the interval properties.
    pub annotated: Value,
    /// Only units with a nonzero interval width.
    pub highlight: Value,
}

fn feature_id(feature: &Value, id_property: &str) -> Option<String> {
    match feature.get("properties")?.get(id_property)? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

/// Joins interval properties onto the features of a GeoJSON collection.
/// Every row must find a feature; unmatched unit ids are reported together.
pub fn join_geometry(geometry: &Value, rows: &[MapRow], id_property: &str) -> Result<UncertaintyMap, MapError> {
    if geometry.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(MapError::InvalidGeometry("expected a FeatureCollection".into()));
    }
    let features = geometry
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| MapError::InvalidGeometry("missing features array".into()))?;
    let by_id: HashMap<&str, &MapRow> = rows.iter().map(|r| (r.unit_id.as_str(), r)).collect();
    let present: HashSet<String> = features.iter().filter_map(|f| feature_id(f, id_property)).collect();
    let unmatched: Vec<String> = rows.iter().filter(|r| !present.contains(&r.unit_id)).map(|r| r.unit_id.clone()).collect();
    if !unmatched.is_empty() {
        return Err(MapError::GeometryJoin(unmatched));
    }

    let mut annotated = Vec::with_capacity(features.len());
    let mut highlight = Vec::new();
    for feature in features {
        let mut f = feature.clone();
        if let Some(row) = feature_id(feature, id_property).and_then(|id| by_id.get(id.as_str()).copied()) {
            let props = f
                .as_object_mut()
                .expect("feature has properties")
                .entry("properties")
                .or_insert_with(|| Value::Object(Map::new()));
            if let Value::Object(p) = props {
                p.insert("width".into(), json!(row.width));
                p.insert("adaptivity_class".into(), json!(row.adaptivity_class.as_str()));
                p.insert("covered".into(), json!(row.covered));
                if let Some(shade) = row.shade() {
                    let mut h = f.clone();
                    h["properties"]["shade"] = json!(shade);
                    highlight.push(h);
                }
            }
        }
        annotated.push(f);
    }
    Ok(UncertaintyMap {
        annotated: json!({ "type": "FeatureCollection", "features": annotated }),
        highlight: json!({ "type": "FeatureCollection", "features": highlight }),
    })
}

/// Square polygon feature for a grid cell, used by the synthetic generator.
pub fn square_feature(id: &str, x0: f64, y0: f64, side: f64, id_property: &str) -> Value {
    let ring = vec![
        [x0, y0],
        [x0 + side, y0],
        [x0 + side, y0 + side],
        [x0, y0 + side],
        [x0, y0],
    ];
    json!({
        "type": "Feature",
        "properties": { id_property: id },
        "geometry": { "type": "Polygon", "coordinates": [ring] },
    })
}
