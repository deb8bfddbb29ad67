//! Wall visibility from a point inside a simple polygon.
//!
//! Each wall subtends an angular interval (< π) at the device. Another wall
//! whose interval overlaps it is, over the whole overlap, either strictly in
//! front or strictly behind (walls of a simple polygon never cross), so one
//! ray through the middle of the overlap decides it. A wall counts as seen
//! when one of the 3600 evenly spaced sensing directions falls in its
//! unoccluded part.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::polygon::ray_segment_hit;
use super::{GeometryError, Point2, Polygon2D};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Visibility {
    #[serde(rename = "LOS")]
    Los,
    #[serde(rename = "NLOS")]
    Nlos,
}

impl Visibility {
    pub fn as_str(self) -> &'static str {
        match self {
            Visibility::Los => "LOS",
            Visibility::Nlos => "NLOS",
        }
    }
}

/// Number of evenly spaced sensing directions (0.1° apart) used to decide
/// whether a wall is seen.
pub const SENSING_DIRECTIONS: usize = 3600;

fn wrap(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// Unoccluded angular pieces of one wall, as absolute `(from, to)` angle
/// pairs with `from <= to`.
fn visible_intervals(edges: &[(Point2, Point2)], wi: usize, o: Point2) -> Vec<(f64, f64)> {
    let (a, b) = edges[wi];
    let base = a.sub(o).y.atan2(a.sub(o).x);
    let rel = |q: Point2| wrap(q.sub(o).y.atan2(q.sub(o).x) - base);
    // Orient the wall interval as [0, span] (possibly via a mirrored angle sign).
    let tb = rel(b);
    let sign = if tb >= 0.0 { 1.0 } else { -1.0 };
    let span = tb.abs();
    if span <= 1e-12 {
        return Vec::new();
    }
    let to_abs = |t: f64| base + sign * t;

    let dist_along = |theta: f64, seg: (Point2, Point2)| -> Option<f64> {
        let dir = Point2::new(theta.cos(), theta.sin());
        ray_segment_hit(o, dir, seg.0, seg.1)
    };

    let mut occluded: Vec<(f64, f64)> = Vec::new();
    for (j, &(c, d)) in edges.iter().enumerate() {
        if j == wi {
            continue;
        }
        let (tc, td) = (sign * rel(c), sign * rel(d));
        let (lo, hi) = if tc <= td { (tc, td) } else { (td, tc) };
        let pieces: Vec<(f64, f64)> = if hi - lo < PI { vec![(lo, hi)] } else { vec![(hi, PI), (-PI, lo)] };
        for (s0, s1) in pieces {
            let (o0, o1) = (s0.max(0.0), s1.min(span));
            if o1 - o0 <= 0.0 {
                continue;
            }
            let mid = to_abs(0.5 * (o0 + o1));
            let (Some(dw), Some(ds)) = (dist_along(mid, (a, b)), dist_along(mid, (c, d))) else {
                continue;
            };
            if ds < dw {
                occluded.push((o0, o1));
            }
        }
    }
    occluded.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut free = Vec::new();
    let mut cursor = 0.0;
    for (s, e) in occluded {
        if s > cursor {
            free.push((cursor, s));
        }
        cursor = f64::max(cursor, e);
    }
    if cursor < span {
        free.push((cursor, span));
    }
    free.into_iter()
        .map(|(t0, t1)| {
            let (x, y) = (to_abs(t0), to_abs(t1));
            if x <= y {
                (x, y)
            } else {
                (y, x)
            }
        })
        .collect()
}

/// Angular extent (radians) of each wall that is not hidden behind another wall.
pub fn visible_wall_extents(p: &Polygon2D, device: Point2) -> Vec<f64> {
    let edges: Vec<(Point2, Point2)> = p.edges().collect();
    (0..edges.len()).map(|i| visible_intervals(&edges, i, device).iter().map(|(a, b)| b - a).sum()).collect()
}

fn contains_sensing_direction(from: f64, to: f64) -> bool {
    let step = 2.0 * PI / SENSING_DIRECTIONS as f64;
    let k = (from / step).ceil();
    k * step <= to
}

/// Whether each wall is reached, unobstructed, by at least one of the
/// `SENSING_DIRECTIONS` directions `2πk/3600` cast from the device.
pub fn sensed_walls(p: &Polygon2D, device: Point2) -> Vec<bool> {
    let edges: Vec<(Point2, Point2)> = p.edges().collect();
    (0..edges.len())
        .map(|i| visible_intervals(&edges, i, device).into_iter().any(|(a, b)| contains_sensing_direction(a, b)))
        .collect()
}

/// LOS when every wall is seen from the device along some sensing direction.
pub fn classify_los(p: &Polygon2D, device: Point2) -> Result<Visibility, GeometryError> {
    if !p.contains(device) || p.distance_to_boundary(device) == 0.0 {
        return Err(GeometryError::DeviceOutsidePolygon);
    }
    let all_visible = sensed_walls(p, device).into_iter().all(|v| v);
    Ok(if all_visible { Visibility::Los } else { Visibility::Nlos })
}
