//! Losses, metrics and the floor/ceiling resolution rule.

mod eval;
mod graph;

pub use eval::{evaluate, summarize, ConstantPredictor, EvalSample, GroupMetrics, MetricReport, ModelPredictor, OraclePredictor, Predictor, Scored};
pub use graph::{total_loss_graph, GraphLoss};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("shape mismatch: {0} vs {1}")]
    ShapeMismatch(usize, usize),
    #[error("height vector has no interior cells")]
    NoInteriorPixels,
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Tensor(#[from] crate::tensor::TensorError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    /// Dice weight.
    pub alpha: f64,
    /// Height MSE weight.
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha: 0.3, beta: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    Original,
    Flipped,
}

fn check(a: &[f64], b: &[f64]) -> Result<(), ObjectiveError> {
    if a.len() != b.len() {
        return Err(ObjectiveError::ShapeMismatch(a.len(), b.len()));
    }
    Ok(())
}

pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64, ObjectiveError> {
    check(pred, target)?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    Ok(pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// `1 - 2 p·t / ‖p + t‖₁` for one sample; zero when both are empty.
pub fn dice_loss(pred: &[f64], target: &[f64]) -> Result<f64, ObjectiveError> {
    check(pred, target)?;
    let inter: f64 = pred.iter().zip(target).map(|(p, t)| p * t).sum();
    let mass: f64 = pred.iter().zip(target).map(|(p, t)| (p + t).abs()).sum();
    Ok(if mass == 0.0 { 0.0 } else { 1.0 - 2.0 * inter / mass })
}

/// Dice loss averaged over `batch` equally sized samples.
pub fn dice_loss_batch(pred: &[f64], target: &[f64], batch: usize) -> Result<f64, ObjectiveError> {
    batch_mean(pred, target, batch, dice_loss)
}

/// `p·t / (‖p + t‖₁ - p·t)` for one sample of binary masks; one when both
/// are empty.
pub fn iou(pred: &[f64], target: &[f64]) -> Result<f64, ObjectiveError> {
    check(pred, target)?;
    let inter: f64 = pred.iter().zip(target).map(|(p, t)| p * t).sum();
    let mass: f64 = pred.iter().zip(target).map(|(p, t)| (p + t).abs()).sum();
    let union = mass - inter;
    Ok(if union == 0.0 { 1.0 } else { inter / union })
}

pub fn iou_batch(pred: &[f64], target: &[f64], batch: usize) -> Result<f64, ObjectiveError> {
    batch_mean(pred, target, batch, iou)
}

fn batch_mean(pred: &[f64], target: &[f64], batch: usize, f: fn(&[f64], &[f64]) -> Result<f64, ObjectiveError>) -> Result<f64, ObjectiveError> {
    check(pred, target)?;
    if batch == 0 || pred.len() % batch != 0 {
        return Err(ObjectiveError::ShapeMismatch(pred.len(), batch));
    }
    let w = pred.len() / batch;
    let mut total = 0.0;
    for (p, t) in pred.chunks(w).zip(target.chunks(w)) {
        total += f(p, t)?;
    }
    Ok(total / batch as f64)
}

/// Height MSE against the better of the target and its reversal.
pub fn pit_height_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Orientation), ObjectiveError> {
    let straight = mse_loss(pred, target)?;
    let rev: Vec<f64> = target.iter().rev().copied().collect();
    let flipped = mse_loss(pred, &rev)?;
    Ok(if flipped < straight { (flipped, Orientation::Flipped) } else { (straight, Orientation::Original) })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub mse_lw: f64,
    pub dice_lw: f64,
    pub mse_h: f64,
    pub total: f64,
}

impl LossParts {
    pub fn combine(mse_lw: f64, dice_lw: f64, mse_h: f64, w: LossWeights) -> Self {
        Self { mse_lw, dice_lw, mse_h, total: mse_lw + w.alpha * dice_lw + w.beta * mse_h }
    }
}

/// `MSE_LW + α·Dice_LW + β·PIT-MSE_H` for one sample of probabilities.
pub fn total_loss(pred_lw: &[f64], pred_h: &[f64], gt_lw: &[f64], gt_h: &[f64], w: LossWeights) -> Result<LossParts, ObjectiveError> {
    Ok(LossParts::combine(mse_loss(pred_lw, gt_lw)?, dice_loss(pred_lw, gt_lw)?, pit_height_loss(pred_h, gt_h)?.0, w))
}

pub fn binarize(p: &[f64]) -> Vec<u8> {
    p.iter().map(|&v| (v >= THRESHOLD) as u8).collect()
}

/// Orient a height vector so the side of the centre with fewer interior
/// cells is the low (floor) end. Ties keep the input order. Returns the
/// oriented binary vector and the index of its lowest interior cell.
pub fn resolve_height_orientation(pred_h: &[f64]) -> Result<(Vec<u8>, usize), ObjectiveError> {
    let mut bits = binarize(pred_h);
    let center = bits.len() / 2;
    let below = bits[..center].iter().filter(|&&b| b == 1).count();
    let above = bits.get(center + 1..).map_or(0, |s| s.iter().filter(|&&b| b == 1).count());
    if below > above {
        bits.reverse();
    }
    let floor = bits.iter().position(|&b| b == 1).ok_or(ObjectiveError::NoInteriorPixels)?;
    Ok((bits, floor))
}
