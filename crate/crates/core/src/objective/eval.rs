use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{binarize, iou, mse_loss, pit_height_loss, resolve_height_orientation, ObjectiveError};
use crate::geometry::{RoomFamily, Visibility};
use crate::model::EchoScan;
use crate::raster::voxel_overlap_counts;
use crate::tensor::{Element, Tensor};

/// One labelled room ready for inference.
#[derive(Clone, Debug)]
pub struct EvalSample {
    pub id: String,
    pub family: RoomFamily,
    pub visibility: Visibility,
    /// `M×N` model input, channel-major.
    pub input: Vec<f32>,
    pub m: usize,
    pub n: usize,
    pub gt_fp: Vec<u8>,
    pub gt_h: Vec<u8>,
}

/// Anything that maps samples to `(floorplan, height)` probabilities.
pub trait Predictor: Sync {
    fn predict(&self, batch: &[&EvalSample]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, ObjectiveError>;
}

pub struct ModelPredictor<'a, T> {
    pub model: &'a EchoScan<T>,
}

impl<T: Element> Predictor for ModelPredictor<'_, T> {
    fn predict(&self, batch: &[&EvalSample]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, ObjectiveError> {
        let Some(first) = batch.first() else { return Ok(Vec::new()) };
        let (m, n) = (first.m, first.n);
        let mut data = Vec::with_capacity(batch.len() * m * n);
        for s in batch {
            data.extend(s.input.iter().map(|&v| v as f64));
        }
        let x = Tensor::<T>::from_f64(&[batch.len(), m, n], &data)?;
        let (fp, h) = self.model.predict(&x)?;
        let (fp, h) = (fp.to_f64_vec(), h.to_f64_vec());
        let (pw, hw) = (fp.len() / batch.len(), h.len() / batch.len());
        Ok((0..batch.len()).map(|i| (fp[i * pw..][..pw].to_vec(), h[i * hw..][..hw].to_vec())).collect())
    }
}

/// Returns the ground truth.
pub struct OraclePredictor;

impl Predictor for OraclePredictor {
    fn predict(&self, batch: &[&EvalSample]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, ObjectiveError> {
        Ok(batch
            .iter()
            .map(|s| (s.gt_fp.iter().map(|&v| v as f64).collect(), s.gt_h.iter().map(|&v| v as f64).collect()))
            .collect())
    }
}

/// Returns the same probability everywhere.
pub struct ConstantPredictor(pub f64);

impl Predictor for ConstantPredictor {
    fn predict(&self, batch: &[&EvalSample]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, ObjectiveError> {
        Ok(batch.iter().map(|s| (vec![self.0; s.gt_fp.len()], vec![self.0; s.gt_h.len()])).collect())
    }
}

/// Per-sample metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub id: String,
    pub family: RoomFamily,
    pub visibility: Visibility,
    pub iou_2d: f64,
    pub iou_3d: f64,
    pub mse_lw: f64,
    pub mse_h: f64,
}

impl Scored {
    pub fn new(sample: &EvalSample, fp: &[f64], h: &[f64]) -> Result<Self, ObjectiveError> {
        let gt_fp: Vec<f64> = sample.gt_fp.iter().map(|&v| v as f64).collect();
        let gt_h: Vec<f64> = sample.gt_h.iter().map(|&v| v as f64).collect();
        let fp_bits = binarize(fp);
        let fp_bin: Vec<f64> = fp_bits.iter().map(|&v| v as f64).collect();
        let h_bits = match resolve_height_orientation(h) {
            Ok((bits, _)) => bits,
            Err(ObjectiveError::NoInteriorPixels) => binarize(h),
            Err(e) => return Err(e),
        };
        if h_bits.len() != sample.gt_h.len() {
            return Err(ObjectiveError::ShapeMismatch(h_bits.len(), sample.gt_h.len()));
        }
        let (inter, union) = voxel_overlap_counts(&fp_bits, &h_bits, &sample.gt_fp, &sample.gt_h);
        Ok(Self {
            id: sample.id.clone(),
            family: sample.family,
            visibility: sample.visibility,
            iou_2d: iou(&fp_bin, &gt_fp)?,
            iou_3d: if union == 0 { 1.0 } else { inter as f64 / union as f64 },
            mse_lw: mse_loss(fp, &gt_fp)?,
            mse_h: pit_height_loss(h, &gt_h)?.0,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupMetrics {
    pub count: usize,
    pub iou_2d: f64,
    pub iou_3d: f64,
    pub mse_lw: f64,
    pub mse_h: f64,
}

impl GroupMetrics {
    fn of<'a>(items: impl Iterator<Item = &'a Scored>) -> Option<Self> {
        let mut g = GroupMetrics { count: 0, iou_2d: 0.0, iou_3d: 0.0, mse_lw: 0.0, mse_h: 0.0 };
        for s in items {
            g.count += 1;
            g.iou_2d += s.iou_2d;
            g.iou_3d += s.iou_3d;
            g.mse_lw += s.mse_lw;
            g.mse_h += s.mse_h;
        }
        if g.count == 0 {
            return None;
        }
        let n = g.count as f64;
        g.iou_2d /= n;
        g.iou_3d /= n;
        g.mse_lw /= n;
        g.mse_h /= n;
        Some(g)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub count: usize,
    pub iou_2d: f64,
    pub iou_3d: f64,
    pub mse_lw: f64,
    pub mse_h: f64,
    pub by_family: BTreeMap<String, GroupMetrics>,
    /// Both keys always present; `null` when a split has no samples.
    pub by_visibility: BTreeMap<String, Option<GroupMetrics>>,
    /// `convex` (shoebox, pentagonal, hexagonal) and `non_convex` (L, T, imported).
    pub by_convexity: BTreeMap<String, Option<GroupMetrics>>,
}

pub fn summarize(items: &[Scored]) -> MetricReport {
    let all = GroupMetrics::of(items.iter()).unwrap_or(GroupMetrics { count: 0, iou_2d: 0.0, iou_3d: 0.0, mse_lw: 0.0, mse_h: 0.0 });
    let mut by_family = BTreeMap::new();
    let mut families: Vec<RoomFamily> = items.iter().map(|s| s.family).collect();
    families.sort();
    families.dedup();
    for f in families {
        if let Some(g) = GroupMetrics::of(items.iter().filter(|s| s.family == f)) {
            by_family.insert(f.as_str().to_string(), g);
        }
    }
    let by_visibility = [Visibility::Los, Visibility::Nlos]
        .into_iter()
        .map(|v| (v.as_str().to_string(), GroupMetrics::of(items.iter().filter(|s| s.visibility == v))))
        .collect();
    let by_convexity = [("convex", true), ("non_convex", false)]
        .into_iter()
        .map(|(k, c)| (k.to_string(), GroupMetrics::of(items.iter().filter(|s| s.family.is_convex_family() == c))))
        .collect();
    MetricReport {
        count: all.count,
        iou_2d: all.iou_2d,
        iou_3d: all.iou_3d,
        mse_lw: all.mse_lw,
        mse_h: all.mse_h,
        by_family,
        by_visibility,
        by_convexity,
    }
}

/// Score every sample with `predictor` in parallel batches of `batch_size`
/// and aggregate. Also returns the per-sample scores in input order.
pub fn evaluate(predictor: &dyn Predictor, samples: &[EvalSample], batch_size: usize) -> Result<(MetricReport, Vec<Scored>), ObjectiveError> {
    let refs: Vec<&EvalSample> = samples.iter().collect();
    let scored: Vec<Vec<Scored>> = refs
        .par_chunks(batch_size.max(1))
        .map(|chunk| {
            let preds = predictor.predict(chunk)?;
            chunk.iter().zip(&preds).map(|(s, (fp, h))| Scored::new(s, fp, h)).collect()
        })
        .collect::<Result<_, ObjectiveError>>()?;
    let scored: Vec<Scored> = scored.into_iter().flatten().collect();
    Ok((summarize(&scored), scored))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, family: RoomFamily, visibility: Visibility, lit: usize) -> EvalSample {
        let mut gt_fp = vec![0u8; 16];
        gt_fp[..lit].iter_mut().for_each(|v| *v = 1);
        EvalSample {
            id: id.into(),
            family,
            visibility,
            input: vec![0.0; 8],
            m: 2,
            n: 4,
            gt_fp,
            gt_h: vec![0, 0, 0, 1, 1, 1, 1, 0],
        }
    }

    fn set() -> Vec<EvalSample> {
        vec![
            sample("a", RoomFamily::Shoebox, Visibility::Los, 4),
            sample("b", RoomFamily::L, Visibility::Nlos, 8),
            sample("c", RoomFamily::L, Visibility::Los, 12),
        ]
    }

    #[test]
    fn oracle_is_perfect() {
        let (r, _) = evaluate(&OraclePredictor, &set(), 2).unwrap();
        assert_eq!((r.iou_2d, r.iou_3d, r.mse_lw, r.mse_h), (1.0, 1.0, 0.0, 0.0));
        assert_eq!(r.by_family["L"].count, 2);
        assert_eq!(r.by_family["shoebox"].count, 1);
        assert_eq!(r.by_visibility["NLOS"].as_ref().unwrap().count, 1);
    }

    #[test]
    fn constant_half() {
        let (r, scores) = evaluate(&ConstantPredictor(0.5), &set(), 1).unwrap();
        for (s, lit) in scores.iter().zip([4.0, 8.0, 12.0]) {
            assert_eq!(s.iou_2d, lit / 16.0);
            assert_eq!(s.mse_lw, 0.25);
            assert_eq!(s.mse_h, 0.25);
            assert_eq!(s.iou_3d, lit * 4.0 / (16.0 * 8.0));
        }
        assert_eq!(r.mse_lw, 0.25);
        assert!((r.iou_2d - 0.5).abs() < 1e-15);
    }

    #[test]
    fn json_shape() {
        let (r, _) = evaluate(&OraclePredictor, &set()[..1], 4).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        for k in ["iou_2d", "iou_3d", "mse_lw", "mse_h", "by_family", "by_visibility"] {
            assert!(v.get(k).is_some(), "{k}");
        }
        assert!(v["by_visibility"]["NLOS"].is_null());
        assert_eq!(v["by_visibility"]["LOS"]["count"], 1);
    }
}
