use super::{LossParts, LossWeights, ObjectiveError, Orientation};
use crate::tensor::{Element, Graph, Tensor, Var};

/// Differentiable training loss and its parts as plain numbers.
#[derive(Clone, Debug)]
pub struct GraphLoss {
    pub total: Var,
    pub parts: LossParts,
    /// Height target orientation chosen for each sample.
    pub orientations: Vec<Orientation>,
}

/// Training objective on logits. `gt_lw: [B, b*b]`, `gt_h: [B, h]`. The
/// height orientation of each sample is fixed from the forward values, so the
/// gradient flows through the winning branch only.
pub fn total_loss_graph<T: Element>(
    g: &mut Graph<T>,
    fp_logits: Var,
    h_logits: Var,
    gt_lw: &Tensor<T>,
    gt_h: &Tensor<T>,
    w: LossWeights,
) -> Result<GraphLoss, ObjectiveError> {
    let p = g.sigmoid(fp_logits);
    let t = g.constant(gt_lw.clone());
    let d = g.sub(p, t)?;
    let sq = g.mul(d, d)?;
    let mse_lw = g.mean_all(sq);
    let dice = g.dice(p, gt_lw)?;

    let ph = g.sigmoid(h_logits);
    let shape = g.shape(ph).to_vec();
    if gt_h.shape() != shape.as_slice() || shape.len() != 2 {
        return Err(ObjectiveError::ShapeMismatch(gt_h.len(), g.value(ph).len()));
    }
    let (batch, h) = (shape[0], shape[1]);
    let probs = g.value(ph).to_f64_vec();
    let gt = gt_h.to_f64_vec();
    let mut chosen = Vec::with_capacity(batch * h);
    let mut orientations = Vec::with_capacity(batch);
    for b in 0..batch {
        let row = &gt[b * h..][..h];
        let (_, o) = super::pit_height_loss(&probs[b * h..][..h], row)?;
        match o {
            Orientation::Original => chosen.extend_from_slice(row),
            Orientation::Flipped => chosen.extend(row.iter().rev()),
        }
        orientations.push(o);
    }
    let th = g.constant(Tensor::from_f64(&shape, &chosen)?);
    let dh = g.sub(ph, th)?;
    let sqh = g.mul(dh, dh)?;
    let mse_h = g.mean_all(sqh);

    let wd = g.scale(dice, w.alpha);
    let wh = g.scale(mse_h, w.beta);
    let partial = g.add(mse_lw, wd)?;
    let total = g.add(partial, wh)?;
    let val = |g: &Graph<T>, v: Var| g.value(v).data()[0].as_f64();
    let parts = LossParts { mse_lw: val(g, mse_lw), dice_lw: val(g, dice), mse_h: val(g, mse_h), total: val(g, total) };
    Ok(GraphLoss { total, parts, orientations })
}
