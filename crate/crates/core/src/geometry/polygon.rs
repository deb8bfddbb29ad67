use serde::{Deserialize, Serialize};

/// A point (or vector) in the horizontal room plane, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self { x, y }
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }

    pub fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }

    pub fn scale(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point2) -> f64 {
        self.sub(o).norm()
    }
}

/// Curved wall replacing the edge that starts at vertex `start`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSegment {
    pub start: usize,
    pub center: Point2,
    pub radius: f64,
    /// Signed sweep in radians, positive counter-clockwise.
    pub sweep: f64,
}

/// Closed polygon; edge `i` runs from vertex `i` to vertex `i + 1 (mod n)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polygon2D {
    pub vertices: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub arc_segments: Vec<ArcSegment>,
}

impl Polygon2D {
    pub fn new(vertices: Vec<Point2>) -> Self {
        Self { vertices, arc_segments: Vec::new() }
    }

    pub fn from_xy(xy: &[(f64, f64)]) -> Self {
        Self::new(xy.iter().map(|&(x, y)| Point2::new(x, y)).collect())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise order.
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.cross(b)).sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Same polygon in counter-clockwise order.
    pub fn to_ccw(&self) -> Polygon2D {
        let mut p = self.clone();
        if p.signed_area() < 0.0 {
            p.vertices.reverse();
        }
        p
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point2 {
        let a = self.signed_area();
        if a.abs() < 1e-15 {
            let n = self.vertices.len().max(1) as f64;
            let s = self.vertices.iter().fold(Point2::new(0.0, 0.0), |s, v| s.add(*v));
            return s.scale(1.0 / n);
        }
        let (mut cx, mut cy) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let c = p.cross(q);
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (6.0 * a), cy / (6.0 * a))
    }

    /// Crossing-number point-in-polygon test. Points exactly on an edge may
    /// land on either side.
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn distance_to_boundary(&self, p: Point2) -> f64 {
        self.edges().map(|(a, b)| point_segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// No two edges meet except adjacent edges at their shared vertex.
    pub fn is_simple(&self) -> bool {
        let n = self.vertices.len();
        if n < 3 {
            return false;
        }
        let v = &self.vertices;
        for i in 0..n {
            let (a, b) = (v[i], v[(i + 1) % n]);
            if a.dist(b) < 1e-12 {
                return false;
            }
            for j in i + 1..n {
                let (c, d) = (v[j], v[(j + 1) % n]);
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    // The two edges share one vertex; the far endpoints must not
                    // lie on the other edge (fold-back).
                    let (shared_far_1, other_1) = if j == i + 1 { (a, (c, d)) } else { (b, (c, d)) };
                    let (shared_far_2, other_2) = if j == i + 1 { (d, (a, b)) } else { (c, (a, b)) };
                    if on_segment(shared_far_1, other_1.0, other_1.1) || on_segment(shared_far_2, other_2.0, other_2.1) {
                        return false;
                    }
                } else if segments_intersect(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Every vertex turns by a non-negligible angle (no spikes, no straight
    /// vertices).
    pub fn has_nonzero_angles(&self) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let p = self.vertices[(i + n - 1) % n];
            let v = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let (e1, e2) = (v.sub(p), q.sub(v));
            e1.cross(e2).abs() > 1e-6 * e1.norm() * e2.norm()
        })
    }

    /// Convex (allowing either orientation).
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let mut sign = 0.0;
        for i in 0..n {
            let (p, v, q) = (self.vertices[i], self.vertices[(i + 1) % n], self.vertices[(i + 2) % n]);
            let c = v.sub(p).cross(q.sub(v));
            if c.abs() < 1e-12 {
                continue;
            }
            if sign == 0.0 {
                sign = c.signum();
            } else if c.signum() != sign {
                return false;
            }
        }
        true
    }

    pub fn translated(&self, d: Point2) -> Polygon2D {
        Polygon2D { vertices: self.vertices.iter().map(|v| v.add(d)).collect(), arc_segments: self.arc_segments.clone() }
    }

    /// Scale about `center` by `k`.
    pub fn scaled_about(&self, center: Point2, k: f64) -> Polygon2D {
        Polygon2D::new(self.vertices.iter().map(|v| center.add(v.sub(center).scale(k))).collect())
    }

    /// Axis-aligned bounding box `(min, max)`.
    pub fn bounds(&self) -> (Point2, Point2) {
        let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Point2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Point2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let ab = b.sub(a);
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (p.sub(a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a.add(ab.scale(t)))
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    b.sub(a).cross(c.sub(a))
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let scale = a.dist(b).max(1.0);
    orient(a, b, p).abs() <= 1e-12 * scale * scale
        && p.x >= a.x.min(b.x) - 1e-12
        && p.x <= a.x.max(b.x) + 1e-12
        && p.y >= a.y.min(b.y) - 1e-12
        && p.y <= a.y.max(b.y) + 1e-12
}

/// Closed-segment intersection test, touching included.
pub fn segments_intersect(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    on_segment(a, c, d) || on_segment(b, c, d) || on_segment(c, a, b) || on_segment(d, a, b)
}

/// Parameter `t` along the ray `origin + t * dir` at which it crosses segment
/// `a-b`, if it does so for `t > 0`.
pub fn ray_segment_hit(origin: Point2, dir: Point2, a: Point2, b: Point2) -> Option<f64> {
    let e = b.sub(a);
    let denom = dir.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ao = a.sub(origin);
    let t = ao.cross(e) / denom;
    let s = ao.cross(dir) / denom;
    (t > 1e-12 && (-1e-12..=1.0 + 1e-12).contains(&s)).then_some(t)
}
