//! GeoJSON ingest of crown annotations and emission of vector outputs.

use std::fs;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::geometry;

/// One annotated crown: closed exterior ring and centroid, both in map units.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub polygon: Vec<[f64; 2]>,
    pub centroid: [f64; 2],
}

impl Annotation {
    /// Builds an annotation whose centroid is the polygon's area centroid.
    pub fn from_polygon(polygon: Vec<[f64; 2]>) -> Result<Self> {
        if !geometry::is_closed(&polygon) {
            return Err(Error::Validation("polygon ring is not closed".into()));
        }
        let centroid = geometry::centroid(&polygon);
        Ok(Annotation { polygon, centroid })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationCollection {
    pub crs_epsg: Option<u32>,
    pub annotations: Vec<Annotation>,
}

fn parse_point(v: &Value) -> Result<[f64; 2]> {
    match v.as_array().map(|a| a.as_slice()) {
        Some([x, y, ..]) => match (x.as_f64(), y.as_f64()) {
            (Some(x), Some(y)) if x.is_finite() && y.is_finite() => Ok([x, y]),
            _ => Err(Error::Validation(format!("non-numeric coordinate {v}"))),
        },
        _ => Err(Error::Validation(format!("bad coordinate {v}"))),
    }
}

fn parse_feature(feature: &Value) -> Result<Annotation> {
    let geom =
        feature.get("geometry").filter(|g| !g.is_null()).ok_or_else(|| Error::Validation("feature without geometry".into()))?;
    let kind = geom.get("type").and_then(Value::as_str).unwrap_or("");
    if kind != "Polygon" {
        return Err(Error::UnsupportedGeometry(kind.to_string()));
    }
    // interior rings are ignored: crowns are annotated as simple outlines
    let exterior = geom
        .get("coordinates")
        .and_then(Value::as_array)
        .and_then(|rings| rings.first())
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Validation("polygon without exterior ring".into()))?;
    let ring = exterior.iter().map(parse_point).collect::<Result<Vec<_>>>()?;
    let mut ann = Annotation::from_polygon(ring)?;
    if let Some(c) = feature.get("properties").and_then(|p| p.get("centroid")) {
        if !c.is_null() {
            ann.centroid = parse_point(c)?;
        }
    }
    Ok(ann)
}

/// Parses a FeatureCollection of Polygon features. A `centroid: [x, y]`
/// property overrides the area centroid.
pub fn parse_annotations(text: &str) -> Result<AnnotationCollection> {
    let root: Value = serde_json::from_str(text)?;
    if root.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::Validation("expected a GeoJSON FeatureCollection".into()));
    }
    let features = root
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Validation("FeatureCollection without features array".into()))?;
    let annotations = features.iter().map(parse_feature).collect::<Result<Vec<_>>>()?;
    let crs_epsg = root.get("crs_epsg").and_then(Value::as_u64).map(|v| v as u32);
    Ok(AnnotationCollection { crs_epsg, annotations })
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_annotations(&text)?.annotations)
}

/// Wraps features into a FeatureCollection, adding `crs_epsg` and any
/// other foreign members.
pub fn write_feature_collection(features: Vec<Value>, crs_epsg: Option<u32>, foreign: Map<String, Value>) -> Value {
    let mut root = Map::new();
    root.insert("type".into(), json!("FeatureCollection"));
    if let Some(epsg) = crs_epsg {
        root.insert("crs_epsg".into(), json!(epsg));
    }
    for (k, v) in foreign {
        root.insert(k, v);
    }
    root.insert("features".into(), Value::Array(features));
    Value::Object(root)
}

impl AnnotationCollection {
    pub fn to_geojson(&self) -> Value {
        let features = self
            .annotations
            .iter()
            .enumerate()
            .map(|(i, a)| {
                json!({
                    "type": "Feature",
                    "properties": { "id": i + 1, "centroid": a.centroid },
                    "geometry": { "type": "Polygon", "coordinates": [a.polygon] },
                })
            })
            .collect();
        write_feature_collection(features, self.crs_epsg, Map::new())
    }
}
