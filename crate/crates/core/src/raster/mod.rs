//! Device-centred ground-truth masks.
//!
//! Column `j` of a `b`-pixel floorplan covers `x = (j - b/2 + 0.5)·ps`
//! relative to the device and row `i` covers `y = (b/2 - i - 0.5)·ps`, so
//! the image top is `+y`. Height index `k` covers
//! `z = (k - h/2 + 0.5)·ps` relative to the device, with `k = 0` lowest.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point2, RoomSpec};

pub const DEFAULT_B: usize = 100;
pub const DEFAULT_H: usize = 40;
pub const DEFAULT_PIXEL_SIZE: f64 = 0.2;

#[derive(Debug, Error, PartialEq)]
pub enum RasterError {
    #[error("room extends {extent:.3} m from the device, canvas half-span is {half_span:.3} m")]
    RoomExceedsCanvas { extent: f64, half_span: f64 },
    #[error("room spans [{lo:.3}, {hi:.3}] m about the device, canvas half-span is {half_span:.3} m")]
    HeightExceedsCanvas { lo: f64, hi: f64, half_span: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloorplanImage {
    /// Row-major `b×b` values in `{0,1}`.
    pub pixels: Vec<u8>,
    pub b: usize,
    pub pixel_size: f64,
}

impl FloorplanImage {
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.b + col]
    }

    pub fn count(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    /// Room-frame offset from the device of the centre of pixel `(row, col)`.
    pub fn pixel_center(b: usize, pixel_size: f64, row: usize, col: usize) -> Point2 {
        let half = b as f64 / 2.0;
        Point2::new((col as f64 - half + 0.5) * pixel_size, (half - row as f64 - 0.5) * pixel_size)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeightVector {
    pub pixels: Vec<u8>,
    pub h: usize,
    pub pixel_size: f64,
}

impl HeightVector {
    pub fn count(&self) -> usize {
        self.pixels.iter().map(|&p| p as usize).sum()
    }

    /// Offset from the device height of the centre of cell `k`.
    pub fn cell_center(h: usize, pixel_size: f64, k: usize) -> f64 {
        (k as f64 - h as f64 / 2.0 + 0.5) * pixel_size
    }

    /// Compact `"0011…"` form used in dataset manifests.
    pub fn to_bit_string(&self) -> String {
        self.pixels.iter().map(|&p| if p == 1 { '1' } else { '0' }).collect()
    }

    pub fn from_bit_string(s: &str, pixel_size: f64) -> Result<Self, RasterError> {
        let pixels = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(RasterError::Shape(format!("height string holds {other:?}"))),
            })
            .collect::<Result<Vec<u8>, _>>()?;
        Ok(Self { h: pixels.len(), pixels, pixel_size })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    /// `voxels[(i*b + j)*h + k]`.
    pub voxels: Vec<u8>,
    pub b: usize,
    pub h: usize,
}

impl VoxelGrid {
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.voxels[(i * self.b + j) * self.h + k]
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().map(|&v| v as usize).sum()
    }
}

pub fn rasterize_floorplan(spec: &RoomSpec, b: usize, pixel_size: f64) -> Result<FloorplanImage, RasterError> {
    let d = spec.device.xy();
    let rel = spec.polygon.translated(d.scale(-1.0));
    let half_span = b as f64 / 2.0 * pixel_size;
    let extent = rel.vertices.iter().map(|v| v.x.abs().max(v.y.abs())).fold(0.0, f64::max);
    if extent > half_span {
        return Err(RasterError::RoomExceedsCanvas { extent, half_span });
    }
    let mut pixels = vec![0u8; b * b];
    for row in 0..b {
        for col in 0..b {
            let c = FloorplanImage::pixel_center(b, pixel_size, row, col);
            pixels[row * b + col] = rel.contains(c) as u8;
        }
    }
    Ok(FloorplanImage { pixels, b, pixel_size })
}

pub fn rasterize_height(spec: &RoomSpec, h: usize, pixel_size: f64) -> Result<HeightVector, RasterError> {
    let (lo, hi) = (-spec.device.z, spec.height - spec.device.z);
    let half_span = h as f64 / 2.0 * pixel_size;
    if lo < -half_span || hi > half_span {
        return Err(RasterError::HeightExceedsCanvas { lo, hi, half_span });
    }
    let pixels = (0..h)
        .map(|k| {
            let z = HeightVector::cell_center(h, pixel_size, k);
            (lo <= z && z <= hi) as u8
        })
        .collect();
    Ok(HeightVector { pixels, h, pixel_size })
}

/// Outer AND of floorplan and height vector.
pub fn extrude_3d(fp: &FloorplanImage, hv: &HeightVector) -> VoxelGrid {
    let mut voxels = Vec::with_capacity(fp.pixels.len() * hv.h);
    for &p in &fp.pixels {
        voxels.extend(hv.pixels.iter().map(|&q| p & q));
    }
    VoxelGrid { voxels, b: fp.b, h: hv.h }
}

/// Voxel IOU without materialising the grids: both grids are outer
/// products, so counts factor into floorplan and height counts.
pub fn voxel_overlap_counts(fp_a: &[u8], hv_a: &[u8], fp_b: &[u8], hv_b: &[u8]) -> (usize, usize) {
    let count = |x: &[u8]| x.iter().map(|&v| v as usize).sum::<usize>();
    let and = |x: &[u8], y: &[u8]| x.iter().zip(y).map(|(&p, &q)| (p & q) as usize).sum::<usize>();
    let inter = and(fp_a, fp_b) * and(hv_a, hv_b);
    let union = count(fp_a) * count(hv_a) + count(fp_b) * count(hv_b) - inter;
    (inter, union)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acoustics::MaterialAssignment;
    use crate::geometry::{make_shoebox_vertices, DevicePose, RoomFamily, SizeParams, Visibility};

    fn shoebox(l: f64, w: f64, height: f64, device: DevicePose) -> RoomSpec {
        RoomSpec {
            polygon: make_shoebox_vertices(SizeParams::new(l, w, height)).to_ccw(),
            height,
            materials: MaterialAssignment::default(),
            device,
            family: RoomFamily::Shoebox,
            los_label: Visibility::Los,
            seed: 0,
            size: None,
        }
    }

    #[test]
    fn centered_block() {
        let room = shoebox(2.0, 2.0, 3.0, DevicePose { x: 0.0, y: 0.0, z: 1.2 });
        let fp = rasterize_floorplan(&room, 100, 0.2).unwrap();
        assert_eq!(fp.count(), 400);
        for r in 0..100 {
            for c in 0..100 {
                let inside = (40..60).contains(&r) && (40..60).contains(&c);
                assert_eq!(fp.get(r, c), inside as u8, "({r},{c})");
            }
        }
    }

    #[test]
    fn device_offset_shifts_block() {
        let room = shoebox(2.0, 2.0, 3.0, DevicePose { x: 1.0, y: 0.0, z: 1.2 });
        let fp = rasterize_floorplan(&room, 100, 0.2).unwrap();
        for c in 0..100 {
            assert_eq!(fp.get(50, c), (35..55).contains(&c) as u8);
        }
    }

    #[test]
    fn too_large_room_rejected() {
        let room = shoebox(5.0, 5.0, 3.0, DevicePose { x: 4.0, y: 0.0, z: 1.2 });
        assert!(matches!(rasterize_floorplan(&room, 32, 0.3), Err(RasterError::RoomExceedsCanvas { .. })));
    }

    #[test]
    fn height_interval() {
        let room = shoebox(2.0, 2.0, 4.0, DevicePose { x: 0.0, y: 0.0, z: 1.2 });
        let hv = rasterize_height(&room, 40, 0.2).unwrap();
        let ones: Vec<usize> = (0..40).filter(|&k| hv.pixels[k] == 1).collect();
        assert_eq!(ones, (14..=33).collect::<Vec<_>>());
        let sym = rasterize_height(&shoebox(2.0, 2.0, 4.0, DevicePose { x: 0.0, y: 0.0, z: 2.0 }), 40, 0.2).unwrap();
        let rev: Vec<u8> = sym.pixels.iter().rev().copied().collect();
        assert_eq!(sym.pixels, rev);
        let tall = shoebox(2.0, 2.0, 5.0, DevicePose { x: 0.0, y: 0.0, z: 0.5 });
        assert!(matches!(rasterize_height(&tall, 40, 0.2), Err(RasterError::HeightExceedsCanvas { .. })));
    }

    #[test]
    fn extrusion_counts() {
        let room = shoebox(2.0, 2.0, 4.0, DevicePose { x: 0.0, y: 0.0, z: 1.2 });
        let fp = rasterize_floorplan(&room, 100, 0.2).unwrap();
        let hv = rasterize_height(&room, 40, 0.2).unwrap();
        let vg = extrude_3d(&fp, &hv);
        assert_eq!(vg.count(), 8000);
        assert_eq!(vg.get(45, 45, 20), 1);
        assert_eq!(vg.get(45, 45, 5), 0);
        let zeros = HeightVector { pixels: vec![0; 40], h: 40, pixel_size: 0.2 };
        assert_eq!(extrude_3d(&fp, &zeros).count(), 0);
    }

    #[test]
    fn bit_string_round_trip() {
        let hv = HeightVector { pixels: vec![0, 1, 1, 0], h: 4, pixel_size: 0.2 };
        assert_eq!(hv.to_bit_string(), "0110");
        assert_eq!(HeightVector::from_bit_string("0110", 0.2).unwrap(), hv);
        assert!(HeightVector::from_bit_string("01x", 0.2).is_err());
    }
}
