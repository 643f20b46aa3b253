//! Choropleth output: joining score tables to region geometry, GeoJSON
//! export, and SVG rendering.
//!
//! Geometry is held as a flat list of closed rings per region. Nesting
//! (which ring is a hole of which polygon) is not tracked; the SVG side
//! compensates by filling with the even-odd rule, which renders holes
//! correctly without knowing the nesting.

mod svg;

pub use svg::{render_svg, render_svg_string, ChoroplethSpec, Rgb, SCORE_DOMAIN};

use std::fs;
use std::path::Path;

use indexmap::IndexMap;
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::scoring::ScoreTable;

/// One region's boundary: any number of closed rings in `(lon, lat)`
/// coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGeometry {
    pub region_id: String,
    pub rings: Vec<Vec<(f64, f64)>>,
}

impl RegionGeometry {
    /// Check that every ring is closed, has at least four points, and has
    /// finite coordinates.
    pub fn validate(&self) -> Result<()> {
        if self.rings.is_empty() {
            return Err(Error::InvalidGeometry(format!("region {}: no rings", self.region_id)));
        }
        for (i, ring) in self.rings.iter().enumerate() {
            if ring.len() < 4 {
                return Err(Error::InvalidGeometry(format!(
                    "region {} ring {i}: {} points, need at least 4",
                    self.region_id,
                    ring.len()
                )));
            }
            if ring.first() != ring.last() {
                return Err(Error::InvalidGeometry(format!(
                    "region {} ring {i}: not closed",
                    self.region_id
                )));
            }
            if ring.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
                return Err(Error::InvalidGeometry(format!(
                    "region {} ring {i}: non-finite coordinate",
                    self.region_id
                )));
            }
        }
        Ok(())
    }
}

/// A region with geometry and all of its score columns, ready to render.
#[derive(Debug, Clone, PartialEq)]
pub struct Feature {
    /// Normalized region id.
    pub region_id: String,
    pub rings: Vec<Vec<(f64, f64)>>,
    /// Every score column for this region, in table column order.
    pub scores: IndexMap<String, f64>,
}

/// Result of joining a score table to a geometry set.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinedFeatures {
    /// Matched regions, in score-table row order.
    pub features: Vec<Feature>,
    /// Score-table ids with no geometry, in table order.
    pub unmatched_scores: Vec<String>,
    /// Geometry ids with no score row (or duplicated), in input order.
    pub unmatched_geometries: Vec<String>,
}

/// Normalize a region id for joining: digit-only ids shorter than five
/// characters are zero-padded to five (ZCTA convention); everything else is
/// left untouched.
pub fn normalize_region_id(id: &str) -> String {
    if !id.is_empty() && id.len() < 5 && id.bytes().all(|b| b.is_ascii_digit()) {
        format!("{:0>5}", id)
    } else {
        id.to_owned()
    }
}

/// Join a score table to geometries by normalized region id.
///
/// Never fails: mismatches on either side are reported, not fatal. Every
/// score row lands in exactly one of `features` or `unmatched_scores`.
pub fn join_geometries(scores: &ScoreTable, geometries: &[RegionGeometry]) -> JoinedFeatures {
    let mut by_id: IndexMap<String, &RegionGeometry> = IndexMap::new();
    let mut unmatched_geometries = Vec::new();
    for geometry in geometries {
        let key = normalize_region_id(&geometry.region_id);
        if by_id.contains_key(&key) {
            // Duplicate geometry ids: first one wins, the rest are reported.
            unmatched_geometries.push(geometry.region_id.clone());
        } else {
            by_id.insert(key, geometry);
        }
    }

    let mut features = Vec::new();
    let mut unmatched_scores = Vec::new();
    let mut matched_keys = std::collections::HashSet::new();
    for (row, id) in scores.region_ids().iter().enumerate() {
        let key = normalize_region_id(id);
        match by_id.get(&key) {
            Some(geometry) => {
                let mut row_scores = IndexMap::new();
                for name in scores.column_names() {
                    row_scores.insert(
                        name.to_owned(),
                        scores.column(name).expect("listed column exists")[row],
                    );
                }
                features.push(Feature {
                    region_id: key.clone(),
                    rings: geometry.rings.clone(),
                    scores: row_scores,
                });
                matched_keys.insert(key);
            }
            None => unmatched_scores.push(id.clone()),
        }
    }
    for (key, geometry) in &by_id {
        if !matched_keys.contains(key) {
            unmatched_geometries.push(geometry.region_id.clone());
        }
    }
    JoinedFeatures { features, unmatched_scores, unmatched_geometries }
}

/// Pull the region id out of a feature's properties, trying each candidate
/// name case-insensitively.
fn property_id(properties: &Map<String, Value>, candidates: &[String]) -> Option<String> {
    for candidate in candidates {
        for (key, value) in properties {
            if key.eq_ignore_ascii_case(candidate) {
                match value {
                    Value::String(s) => return Some(s.trim().to_owned()),
                    Value::Number(n) => {
                        if let Some(i) = n.as_i64() {
                            return Some(i.to_string());
                        }
                    }
                    _ => {}
                }
            }
        }
    }
    None
}

fn ring_from_json(ring: &Value, context: &str) -> Result<Vec<(f64, f64)>> {
    let positions = ring
        .as_array()
        .ok_or_else(|| Error::InvalidGeometry(format!("{context}: ring is not an array")))?;
    positions
        .iter()
        .map(|position| {
            let coords = position.as_array().ok_or_else(|| {
                Error::InvalidGeometry(format!("{context}: position is not an array"))
            })?;
            // GeoJSON positions are [lon, lat, ...]; extra members ignored.
            match (coords.first().and_then(Value::as_f64), coords.get(1).and_then(Value::as_f64)) {
                (Some(lon), Some(lat)) => Ok((lon, lat)),
                _ => Err(Error::InvalidGeometry(format!(
                    "{context}: position is not numeric [lon, lat]"
                ))),
            }
        })
        .collect()
}

/// Read region geometries from a GeoJSON `FeatureCollection`.
///
/// `id_candidates` are property names tried in order (case-insensitively)
/// for the region id. `Polygon` and `MultiPolygon` geometries are accepted;
/// multi-polygons flatten into the region's ring list.
pub fn read_geojson(path: &Path, id_candidates: &[String]) -> Result<Vec<RegionGeometry>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: Value = serde_json::from_str(&text)?;
    if root["type"] != "FeatureCollection" {
        return Err(Error::InvalidGeometry(format!(
            "{}: expected a FeatureCollection, got {:?}",
            path.display(),
            root["type"]
        )));
    }
    let features = root["features"]
        .as_array()
        .ok_or_else(|| Error::InvalidGeometry(format!("{}: no features array", path.display())))?;

    let mut geometries = Vec::with_capacity(features.len());
    for (index, feature) in features.iter().enumerate() {
        let context = format!("feature {index}");
        let empty = Map::new();
        let properties = feature["properties"].as_object().unwrap_or(&empty);
        let region_id = property_id(properties, id_candidates).ok_or_else(|| {
            let available: Vec<&str> = properties.keys().map(String::as_str).collect();
            Error::InvalidGeometry(format!(
                "{context}: none of the id properties {id_candidates:?} found; available: {available:?}"
            ))
        })?;

        let geometry = &feature["geometry"];
        let rings: Vec<Vec<(f64, f64)>> = match geometry["type"].as_str() {
            Some("Polygon") => geometry["coordinates"]
                .as_array()
                .ok_or_else(|| Error::InvalidGeometry(format!("{context}: no coordinates")))?
                .iter()
                .map(|ring| ring_from_json(ring, &context))
                .collect::<Result<_>>()?,
            Some("MultiPolygon") => {
                let polygons = geometry["coordinates"]
                    .as_array()
                    .ok_or_else(|| Error::InvalidGeometry(format!("{context}: no coordinates")))?;
                let mut rings = Vec::new();
                for polygon in polygons {
                    let polygon_rings = polygon.as_array().ok_or_else(|| {
                        Error::InvalidGeometry(format!("{context}: polygon is not an array"))
                    })?;
                    for ring in polygon_rings {
                        rings.push(ring_from_json(ring, &context)?);
                    }
                }
                rings
            }
            other => {
                return Err(Error::InvalidGeometry(format!(
                    "{context}: unsupported geometry type {other:?}"
                )))
            }
        };
        let geometry = RegionGeometry { region_id, rings };
        geometry.validate()?;
        geometries.push(geometry);
    }
    Ok(geometries)
}

/// Write joined features as a GeoJSON `FeatureCollection`.
///
/// Properties carry the region id plus one entry per score column at full
/// float precision; each ring becomes its own polygon of a `MultiPolygon`,
/// mirroring the flat ring model.
pub fn write_geojson(features: &[Feature], path: &Path) -> Result<()> {
    let feature_values: Vec<Value> = features
        .iter()
        .map(|feature| {
            let mut properties = Map::new();
            properties.insert("region_id".into(), Value::String(feature.region_id.clone()));
            for (name, &value) in &feature.scores {
                properties.insert(name.clone(), json!(value));
            }
            let coordinates: Vec<Value> = feature
                .rings
                .iter()
                .map(|ring| {
                    let positions: Vec<Value> =
                        ring.iter().map(|(lon, lat)| json!([lon, lat])).collect();
                    json!([positions])
                })
                .collect();
            json!({
                "type": "Feature",
                "properties": properties,
                "geometry": { "type": "MultiPolygon", "coordinates": coordinates },
            })
        })
        .collect();
    let collection = json!({ "type": "FeatureCollection", "features": feature_values });
    let text = serde_json::to_string_pretty(&collection)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
pub(crate) fn square(region_id: &str, x: f64, y: f64, side: f64) -> RegionGeometry {
    RegionGeometry {
        region_id: region_id.into(),
        rings: vec![vec![(x, y), (x + side, y), (x + side, y + side), (x, y + side), (x, y)]],
    }
}
