//! Image sources of a vertical prism: sidewall images come from recursive
//! mirroring of the floorplan, floor/ceiling images from the 1-D mirror
//! series along z. The two are independent because every sidewall is
//! vertical and the floor and ceiling are horizontal.

use serde::{Deserialize, Serialize};

use crate::geometry::{Point2, Polygon2D, RoomSpec};

pub const ORDER_CAP: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageSource {
    pub position: [f64; 3],
    /// Total number of reflections.
    pub order: usize,
    /// Product of per-bounce reflection factors.
    pub amplitude: f64,
    pub sidewall_bounces: usize,
    pub floor_bounces: usize,
    pub ceiling_bounces: usize,
}

#[derive(Clone, Copy, Debug)]
struct WallLine {
    a: Point2,
    b: Point2,
}

impl WallLine {
    /// Positive on the interior side of a counter-clockwise polygon edge.
    fn side(&self, p: Point2) -> f64 {
        self.b.sub(self.a).cross(p.sub(self.a))
    }

    fn mirror(&self, p: Point2) -> Point2 {
        let d = self.b.sub(self.a);
        let t = p.sub(self.a).dot(d) / d.dot(d);
        let foot = self.a.add(d.scale(t));
        foot.scale(2.0).sub(p)
    }
}

/// Sidewall image in the floorplan together with the walls it was mirrored
/// across, first bounce first. `chain[0]` is the source, `chain[k]` the
/// image after `k` bounces.
#[derive(Clone, Debug)]
pub(crate) struct PlanImage {
    pub position: Point2,
    pub walls: Vec<usize>,
    pub chain: Vec<Point2>,
}

struct Node {
    position: Point2,
    /// Part of the last mirror wall that rays from this image can pass through.
    window: Option<(Point2, Point2)>,
    parent: usize,
    wall: usize,
    depth: usize,
}

/// Keep the part of `c + t (d - c)`, `t ∈ [lo, hi]`, where `f >= 0`; `f` is
/// linear along the segment with values `f0` at `c` and `f1` at `d`.
fn clip(lo: f64, hi: f64, f0: f64, f1: f64) -> Option<(f64, f64)> {
    if f0 >= 0.0 && f1 >= 0.0 {
        return Some((lo, hi));
    }
    if f0 < 0.0 && f1 < 0.0 {
        return None;
    }
    let t = f0 / (f0 - f1);
    let (lo, hi) = if f0 < 0.0 { (lo.max(t), hi) } else { (lo, hi.min(t)) };
    (hi - lo > 1e-12).then_some((lo, hi))
}

/// Portion of wall `c-d` reached by rays from `q` that first pass through
/// the window `a-b`.
fn lit_portion(q: Point2, (a, b): (Point2, Point2), c: Point2, d: Point2) -> Option<(Point2, Point2)> {
    let side = |o: Point2, dir: Point2, toward: Point2| {
        let s = dir.cross(toward.sub(o)).signum();
        move |p: Point2| s * dir.cross(p.sub(o))
    };
    let f_a = side(q, a.sub(q), b);
    let f_b = side(q, b.sub(q), a);
    let beyond = {
        let s = -b.sub(a).cross(q.sub(a)).signum();
        move |p: Point2| s * b.sub(a).cross(p.sub(a))
    };
    let (lo, hi) = clip(0.0, 1.0, f_a(c), f_a(d))?;
    let (lo, hi) = clip(lo, hi, f_b(c), f_b(d))?;
    let (lo, hi) = clip(lo, hi, beyond(c), beyond(d))?;
    let e = d.sub(c);
    Some((c.add(e.scale(lo)), c.add(e.scale(hi))))
}

/// Crossing parameter of `p + t (q - p)` with segment `a-b`, requiring the
/// crossing to lie on the segment.
fn segment_crossing(p: Point2, q: Point2, a: Point2, b: Point2) -> Option<(f64, f64)> {
    let r = q.sub(p);
    let e = b.sub(a);
    let denom = r.cross(e);
    if denom.abs() < 1e-15 {
        return None;
    }
    let ap = a.sub(p);
    let t = ap.cross(e) / denom;
    let u = ap.cross(r) / denom;
    (-1e-12..=1.0 + 1e-12).contains(&u).then_some((t, u))
}

fn leg_blocked(walls: &[WallLine], from: Point2, to: Point2) -> bool {
    const EPS: f64 = 1e-9;
    walls.iter().any(|w| matches!(segment_crossing(from, to, w.a, w.b), Some((t, _)) if t > EPS && t < 1.0 - EPS))
}

/// Trace the unfolded path from `receiver` back to the source and check
/// that every bounce lands on its wall and every leg stays inside the room.
fn path_is_valid(walls: &[WallLine], img: &PlanImage, receiver: Point2) -> bool {
    let mut p = receiver;
    for k in (0..img.walls.len()).rev() {
        let w = walls[img.walls[k]];
        let target = img.chain[k + 1];
        let Some((t, u)) = segment_crossing(p, target, w.a, w.b) else {
            return false;
        };
        if !(t > 0.0 && t < 1.0) || !(1e-9..=1.0 - 1e-9).contains(&u) {
            return false;
        }
        let hit = p.add(target.sub(p).scale(t));
        if leg_blocked(walls, p, hit) {
            return false;
        }
        p = hit;
    }
    !leg_blocked(walls, p, img.chain[0])
}

fn distance_to_room(room: &Polygon2D, q: Point2) -> f64 {
    if room.contains(q) {
        0.0
    } else {
        room.distance_to_boundary(q)
    }
}

/// All valid floorplan images (including the source itself) whose path to
/// `receiver` is at most `max_dist` and whose order is at most `order_cap`.
pub(crate) fn plan_images(room: &Polygon2D, source: Point2, receiver: Point2, max_dist: f64, order_cap: usize) -> Vec<PlanImage> {
    let poly = room.to_ccw();
    let walls: Vec<WallLine> = poly.edges().map(|(a, b)| WallLine { a, b }).collect();
    let mut nodes = vec![Node { position: source, window: None, parent: usize::MAX, wall: usize::MAX, depth: 0 }];
    let mut stack = vec![0usize];
    let mut out = Vec::new();
    while let Some(id) = stack.pop() {
        let (pos, window, depth, last) = (nodes[id].position, nodes[id].window, nodes[id].depth, nodes[id].wall);
        if pos.dist(receiver) <= max_dist {
            let mut walls_seq = Vec::with_capacity(depth);
            let mut chain = Vec::with_capacity(depth + 1);
            let mut k = id;
            while k != 0 {
                walls_seq.push(nodes[k].wall);
                chain.push(nodes[k].position);
                k = nodes[k].parent;
            }
            chain.push(source);
            walls_seq.reverse();
            chain.reverse();
            let img = PlanImage { position: pos, walls: walls_seq, chain };
            if path_is_valid(&walls, &img, receiver) {
                out.push(img);
            }
        }
        if depth >= order_cap {
            continue;
        }
        for (i, w) in walls.iter().enumerate() {
            if i == last || w.side(pos) <= 0.0 {
                continue;
            }
            let lit = match window {
                None => Some((w.a, w.b)),
                Some(win) => lit_portion(pos, win, w.a, w.b),
            };
            let Some(lit) = lit else { continue };
            let child = w.mirror(pos);
            if distance_to_room(&poly, child) > max_dist {
                continue;
            }
            nodes.push(Node { position: child, window: Some(lit), parent: id, wall: i, depth: depth + 1 });
            stack.push(nodes.len() - 1);
        }
    }
    out
}

/// Vertical images `(z, floor bounces, ceiling bounces)` of a source at
/// height `z0` in a room of height `h`, up to `max_order` reflections.
pub(crate) fn vertical_images(z0: f64, h: f64, max_order: usize) -> Vec<(f64, usize, usize)> {
    let mut out = vec![(z0, 0, 0)];
    let reach = max_order as i64 + 1;
    for m in -reach..=reach {
        let ma = m.unsigned_abs() as usize;
        if m != 0 && 2 * ma <= max_order {
            out.push((2.0 * m as f64 * h + z0, ma, ma));
        }
        let (ceil, floor) = if m >= 1 { (ma, ma - 1) } else { (ma, ma + 1) };
        if ceil + floor <= max_order {
            out.push((2.0 * m as f64 * h - z0, floor, ceil));
        }
    }
    out
}

/// Every image source of `spec` (direct path excluded) whose path to the
/// device is at most `max_dist`, with at most `order_cap` reflections.
pub fn enumerate_image_sources_capped(spec: &RoomSpec, max_dist: f64, order_cap: usize) -> Vec<ImageSource> {
    let src = spec.device.xy();
    let plan = plan_images(&spec.polygon, src, src, max_dist, order_cap);
    let vert = vertical_images(spec.device.z, spec.height, order_cap);
    let (rs, rf, rc) = (spec.materials.sidewall.reflection(), spec.materials.floor.reflection(), spec.materials.ceiling.reflection());
    let mut out = Vec::new();
    for p in &plan {
        let d2 = p.position.dist(src);
        for &(z, nf, nc) in &vert {
            let order = p.walls.len() + nf + nc;
            if order == 0 || order > order_cap {
                continue;
            }
            let dz = z - spec.device.z;
            if (d2 * d2 + dz * dz).sqrt() > max_dist {
                continue;
            }
            let amplitude = rs.powi(p.walls.len() as i32) * rf.powi(nf as i32) * rc.powi(nc as i32);
            out.push(ImageSource {
                position: [p.position.x, p.position.y, z],
                order,
                amplitude,
                sidewall_bounces: p.walls.len(),
                floor_bounces: nf,
                ceiling_bounces: nc,
            });
        }
    }
    out
}

pub fn enumerate_image_sources(spec: &RoomSpec, max_dist: f64) -> Vec<ImageSource> {
    enumerate_image_sources_capped(spec, max_dist, ORDER_CAP)
}

pub fn truncate_first_order(images: &[ImageSource]) -> Vec<ImageSource> {
    images.iter().filter(|i| i.order == 1).copied().collect()
}
