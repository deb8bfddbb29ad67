//! Import of arbitrary room layouts from JSON.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{classify_los, place_device, rng_for, ArcSegment, DevicePose, GeometryError, Point2, Polygon2D, RoomFamily, RoomSpec};
use crate::acoustics::assign_materials;

/// Largest allowed distance between an arc and its chords, in meters.
pub const ARC_MAX_SAGITTA: f64 = 0.1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutArc {
    pub start: usize,
    pub center: [f64; 2],
    pub radius: f64,
    pub sweep: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutFile {
    pub vertices: Vec<[f64; 2]>,
    #[serde(default)]
    pub arcs: Vec<LayoutArc>,
    pub height: f64,
    #[serde(default)]
    pub device: Option<[f64; 3]>,
}

/// Interior points (endpoints excluded) of an arc starting at `from`,
/// spaced so that no chord strays more than `ARC_MAX_SAGITTA` from the arc.
pub fn discretize_arc(from: Point2, center: Point2, radius: f64, sweep: f64) -> Vec<Point2> {
    let max_step = if radius <= ARC_MAX_SAGITTA { PI / 2.0 } else { 2.0 * (1.0 - ARC_MAX_SAGITTA / radius).acos() };
    let n = (sweep.abs() / max_step).ceil().max(1.0) as usize;
    let a0 = (from.y - center.y).atan2(from.x - center.x);
    (1..n)
        .map(|k| {
            let a = a0 + sweep * k as f64 / n as f64;
            Point2::new(center.x + radius * a.cos(), center.y + radius * a.sin())
        })
        .collect()
}

fn build_polygon(file: &LayoutFile) -> Result<Polygon2D, GeometryError> {
    let n = file.vertices.len();
    if n < 2 {
        return Err(GeometryError::Parse(format!("layout needs at least 2 vertices, got {n}")));
    }
    if !(file.height.is_finite() && file.height > 0.0) {
        return Err(GeometryError::Parse(format!("invalid height {}", file.height)));
    }
    let mut arcs: Vec<Option<&LayoutArc>> = vec![None; n];
    for arc in &file.arcs {
        if arc.start >= n {
            return Err(GeometryError::Parse(format!("arc start {} out of range", arc.start)));
        }
        if !(arc.radius > 0.0 && arc.sweep.is_finite() && arc.sweep != 0.0 && arc.sweep.abs() < 2.0 * PI) {
            return Err(GeometryError::Parse(format!("invalid arc at vertex {}", arc.start)));
        }
        if arcs[arc.start].replace(arc).is_some() {
            return Err(GeometryError::Parse(format!("two arcs start at vertex {}", arc.start)));
        }
    }
    let mut vertices = Vec::new();
    let mut spans = Vec::new();
    for (i, v) in file.vertices.iter().enumerate() {
        let p = Point2::new(v[0], v[1]);
        vertices.push(p);
        if let Some(arc) = arcs[i] {
            let center = Point2::new(arc.center[0], arc.center[1]);
            let s = vertices.len() - 1;
            vertices.extend(discretize_arc(p, center, arc.radius, arc.sweep));
            spans.push((s, vertices.len(), ArcSegment { start: s, center, radius: arc.radius, sweep: arc.sweep }));
        }
    }
    if vertices.len() < 3 {
        return Err(GeometryError::Parse("layout encloses no area".into()));
    }
    let mut poly = Polygon2D::new(vertices);
    let total = poly.len();
    let reversed = poly.signed_area() < 0.0;
    if reversed {
        poly.vertices.reverse();
    }
    // After reversal the arc runs backwards from its old end vertex.
    let arc_segments = spans
        .into_iter()
        .map(|(s, e, a)| if reversed { ArcSegment { start: total - 1 - e % total, sweep: -a.sweep, ..a } } else { ArcSegment { start: s, ..a } })
        .collect();
    poly.arc_segments = arc_segments;
    if !poly.is_simple() || !poly.has_nonzero_angles() {
        return Err(GeometryError::NonSimplePolygon);
    }
    Ok(poly)
}

/// Build a room from layout JSON text. A missing device pose is drawn with
/// the usual placement rule from `seed`.
pub fn parse_layout(text: &str, seed: u64) -> Result<RoomSpec, GeometryError> {
    let file: LayoutFile = serde_json::from_str(text).map_err(|e| GeometryError::Parse(e.to_string()))?;
    let polygon = build_polygon(&file)?;
    let mut rng = rng_for(seed);
    let device = match file.device {
        Some([x, y, z]) => DevicePose { x, y, z },
        None => place_device(&polygon, &mut rng)?,
    };
    if !(0.0..file.height).contains(&device.z) {
        return Err(GeometryError::Parse(format!("device height {} outside room height {}", device.z, file.height)));
    }
    let los_label = classify_los(&polygon, device.xy())?;
    let materials = assign_materials(&mut rng);
    Ok(RoomSpec { polygon, height: file.height, materials, device, family: RoomFamily::Imported, los_label, seed, size: None })
}

pub fn import_layout(path: impl AsRef<Path>, seed: u64) -> Result<RoomSpec, GeometryError> {
    let text = std::fs::read_to_string(path)?;
    parse_layout(&text, seed)
}
