use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point2, Polygon2D};

/// Half-length, half-width and full height of a prototype room, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeParams {
    pub s_l: f64,
    pub s_w: f64,
    pub s_h: f64,
}

impl SizeParams {
    pub fn new(s_l: f64, s_w: f64, s_h: f64) -> Self {
        Self { s_l, s_w, s_h }
    }

    /// Uniform draw from `[2,5] x [2,5] x [3,5]`.
    pub fn sample(rng: &mut impl Rng) -> Self {
        Self { s_l: rng.random_range(2.0..=5.0), s_w: rng.random_range(2.0..=5.0), s_h: rng.random_range(3.0..=5.0) }
    }
}

pub fn make_shoebox_vertices(s: SizeParams) -> Polygon2D {
    let (l, w) = (s.s_l, s.s_w);
    Polygon2D::from_xy(&[(-l, -w), (-l, w), (l, w), (l, -w)])
}

/// `v_k = (s_l cos(2πk/K), s_w sin(2πk/K))` for `k = 1..=K`.
pub fn make_regular_polygon_vertices(sides: usize, s: SizeParams) -> Result<Polygon2D, GeometryError> {
    if !(sides == 5 || sides == 6) {
        return Err(GeometryError::InvalidParameter(format!("regular room needs 5 or 6 sides, got {sides}")));
    }
    let k = sides as f64;
    Ok(Polygon2D::new(
        (1..=sides)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / k;
                Point2::new(s.s_l * a.cos(), s.s_w * a.sin())
            })
            .collect(),
    ))
}

/// Shoebox with the `(+s_l, +s_w)` corner cut by `mu_l x mu_w`. A zero cut
/// returns the plain shoebox.
pub fn make_l_vertices(s: SizeParams, mu_l: f64, mu_w: f64) -> Result<Polygon2D, GeometryError> {
    let (l, w) = (s.s_l, s.s_w);
    if !(0.0..=0.5 * l).contains(&mu_l) || !(0.0..=0.5 * w).contains(&mu_w) {
        return Err(GeometryError::InvalidParameter(format!("L cut ({mu_l}, {mu_w}) outside [0, s/2]")));
    }
    if mu_l == 0.0 || mu_w == 0.0 {
        return Ok(make_shoebox_vertices(s));
    }
    Ok(Polygon2D::from_xy(&[(-l, -w), (-l, w), (l - mu_l, w), (l - mu_l, w - mu_w), (l, w - mu_w), (l, -w)]))
}

/// Shoebox with two notches cut from the `-y` edge: `x ∈ [-s_l, mu_l1]` and
/// `x ∈ [mu_l2, s_l]`, both spanning `y ∈ [-s_w, mu_w]`.
pub fn make_t_vertices(s: SizeParams, mu_l1: f64, mu_l2: f64, mu_w: f64) -> Result<Polygon2D, GeometryError> {
    let (l, w) = (s.s_l, s.s_w);
    let ok = (-0.75 * l..=-0.25 * l).contains(&mu_l1) && (0.25 * l..=0.75 * l).contains(&mu_l2) && (-0.5 * w..=0.0).contains(&mu_w);
    if !ok {
        return Err(GeometryError::InvalidParameter(format!("T notches ({mu_l1}, {mu_l2}, {mu_w}) out of range")));
    }
    Ok(Polygon2D::from_xy(&[
        (-l, w),
        (l, w),
        (l, mu_w),
        (mu_l2, mu_w),
        (mu_l2, -w),
        (mu_l1, -w),
        (mu_l1, mu_w),
        (-l, mu_w),
    ]))
}

pub const CRUMPLE_RETRIES: usize = 100;

/// Shift each vertex by independent uniform offsets in `[-max_shift, max_shift]`
/// per axis, redrawing until the result is simple with no degenerate corners.
pub fn crumple(p: &Polygon2D, rng: &mut impl Rng, max_shift: f64) -> Result<Polygon2D, GeometryError> {
    if max_shift == 0.0 {
        return Ok(p.clone());
    }
    for _ in 0..CRUMPLE_RETRIES {
        let q = Polygon2D::new(
            p.vertices
                .iter()
                .map(|v| Point2::new(v.x + rng.random_range(-max_shift..=max_shift), v.y + rng.random_range(-max_shift..=max_shift)))
                .collect(),
        );
        if q.is_simple() && q.has_nonzero_angles() {
            return Ok(q);
        }
    }
    Err(GeometryError::CrumpleFailed)
}

/// Rotate about the origin.
pub fn rotate(p: &Polygon2D, theta: f64) -> Polygon2D {
    let (s, c) = theta.sin_cos();
    let mut out = p.clone();
    for v in &mut out.vertices {
        *v = Point2::new(c * v.x - s * v.y, s * v.x + c * v.y);
    }
    for a in &mut out.arc_segments {
        a.center = Point2::new(c * a.center.x - s * a.center.y, s * a.center.x + c * a.center.y);
    }
    out
}
