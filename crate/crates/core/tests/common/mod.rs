#![allow(dead_code)]

use echo_lab::geometry::{ray_segment_hit, Point2, Polygon2D, Visibility};

pub const ORACLE_RAYS: usize = 3600;

/// Brute-force visibility: cast evenly spaced rays from the device and mark
/// the nearest wall each one hits.
pub fn ray_cast_los(p: &Polygon2D, device: Point2) -> Visibility {
    let edges: Vec<(Point2, Point2)> = p.edges().collect();
    let mut seen = vec![false; edges.len()];
    for k in 0..ORACLE_RAYS {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / ORACLE_RAYS as f64;
        let dir = Point2::new(theta.cos(), theta.sin());
        let mut best: Option<(f64, usize)> = None;
        for (i, &(a, b)) in edges.iter().enumerate() {
            if let Some(t) = ray_segment_hit(device, dir, a, b) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, i));
                }
            }
        }
        if let Some((_, i)) = best {
            seen[i] = true;
        }
    }
    if seen.iter().all(|&s| s) {
        Visibility::Los
    } else {
        Visibility::Nlos
    }
}

/// Shoelace area computed independently of the library.
pub fn shoelace(v: &[(f64, f64)]) -> f64 {
    let n = v.len();
    (0..n).map(|i| v[i].0 * v[(i + 1) % n].1 - v[(i + 1) % n].0 * v[i].1).sum::<f64>().abs() / 2.0
}

/// Closed-form first-order echo distances for every microphone of a convex
/// room: each wall contributes a mirror image if the perpendicular foot of
/// the device lies on it; floor and ceiling mirror the device height.
pub fn first_order_mirror_distances(room: &echo_lab::geometry::RoomSpec) -> Vec<Vec<f64>> {
    let d = room.device;
    let mut images: Vec<[f64; 3]> = Vec::new();
    let p = room.polygon.to_ccw();
    for (a, b) in p.edges() {
        let (ex, ey) = (b.x - a.x, b.y - a.y);
        let t = ((d.x - a.x) * ex + (d.y - a.y) * ey) / (ex * ex + ey * ey);
        if !(0.0..=1.0).contains(&t) {
            continue;
        }
        let (fx, fy) = (a.x + t * ex, a.y + t * ey);
        images.push([2.0 * fx - d.x, 2.0 * fy - d.y, d.z]);
    }
    images.push([d.x, d.y, -d.z]);
    images.push([d.x, d.y, 2.0 * room.height - d.z]);
    let mics = echo_lab::acoustics::MicArray::ring(d).mic_positions;
    images
        .iter()
        .map(|im| mics.iter().map(|m| ((im[0] - m[0]).powi(2) + (im[1] - m[1]).powi(2) + (im[2] - m[2]).powi(2)).sqrt()).collect())
        .collect()
}

/// Largest gap, in samples, between a first-order echo peak in the
/// simulated response and the closed-form arrival time, over all images and
/// microphones of one room. `None` if the image sets differ in size.
pub fn first_order_toa_error(room: &echo_lab::geometry::RoomSpec, fs: f64, n: usize) -> Option<f64> {
    use echo_lab::acoustics::*;
    let c = SPEED_OF_SOUND;
    let images = truncate_first_order(&enumerate_image_sources(room, c * n as f64 / fs));
    let oracle = first_order_mirror_distances(room);
    if images.len() != oracle.len() {
        return None;
    }
    let array = MicArray::ring(room.device);
    let mut used = vec![false; oracle.len()];
    let mut worst: f64 = 0.0;
    for img in &images {
        let rir = synthesize_rir(std::slice::from_ref(img), &array, fs, n, c);
        let peaks: Vec<f64> = (0..rir.m)
            .map(|ch| rir.channel(ch).iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i as f64).unwrap())
            .collect();
        let (best, err) = oracle
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .map(|(i, ds)| (i, ds.iter().zip(&peaks).map(|(d, p)| (d * fs / c - p).abs()).fold(0.0, f64::max)))
            .min_by(|a, b| a.1.total_cmp(&b.1))?;
        used[best] = true;
        worst = worst.max(err);
    }
    Some(worst)
}
